#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cherry/numerics.hpp"
#include "helpers.hpp"

using namespace cherry;
using testutil::close_rel;
using testutil::rand_real;

TEST_CASE("context echoes precision and rejects narrow widths", "[numerics]") {
    auto ctx = make_context(256);
    CHECK(ctx.precision_bits() == 256);
    CHECK(make_context(64).precision_bits() == 64);
    CHECK_THROWS_AS(make_context(32), ConfigError);
    CHECK_THROWS_AS(make_context(0), ConfigError);
}

TEST_CASE("decimal literals parse at context precision", "[numerics]") {
    auto ctx = make_context(256);
    Real x = ctx.real("0.05");
    CHECK(x.prec() == 256);
    // 0.05 is not a binary fraction; the parse must round to 256 bits, so the
    // doubled-precision parse differs by less than 2^-255 relative
    auto wide = make_context(512);
    Real y = wide.real("0.05");
    CHECK(close_rel(x, y, ctx.eps(1)));
    CHECK_THROWS_AS(ctx.real("zebra"), ConfigError);
}

TEST_CASE("hex form round-trips exactly", "[numerics]") {
    auto ctx = make_context(256);
    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        Real x = rand_real(ctx, rng, -10.0, 10.0);
        Real pi = ctx.pi();
        Real v = x * pi;  // fill the mantissa
        Real back = Real::from_str(v.str_hex(), 256);
        REQUIRE(back == v);
    }
}

TEST_CASE("log-magnitude of exp(-100) against doubled-precision oracle", "[numerics]") {
    auto ctx = make_context(256);
    Real x = exp(ctx.real(-100));
    LogMag m = to_logmag(x);
    CHECK(m.sign == 1);
    // oracle: same computation at 2P bits
    auto wide = make_context(512);
    Real oracle = log(abs(exp(wide.real(-100))));
    CHECK(close_rel(m.logAbs, oracle, ctx.eps(8)));
    CHECK(close_rel(m.logAbs, ctx.real(-100), ctx.eps(8)));
}

TEST_CASE("log-magnitude zero is an exact sentinel", "[numerics]") {
    auto ctx = make_context(256);
    LogMag z = to_logmag(ctx.zero());
    CHECK(z.sign == 0);
    CHECK(z.is_zero());
    CHECK(from_logmag(z).is_zero());
    LogMag p = lm_mul(z, LogMag::one(256));
    CHECK(p.sign == 0);
}

TEST_CASE("round trip to_logmag/from_logmag within 2^(1-P)", "[numerics]") {
    auto ctx = make_context(256);
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        Real x = rand_real(ctx, rng, -1000.0, 1000.0);
        if (x.is_zero()) continue;
        Real back = from_logmag(to_logmag(x));
        REQUIRE(close_rel(back, x, ctx.eps(1)));
    }
}

TEST_CASE("product law in the log domain", "[numerics][property]") {
    auto ctx = make_context(256);
    std::mt19937_64 rng(13);
    Real tol = Real::pow2(-200, 256);
    for (int i = 0; i < 200; ++i) {
        Real a = rand_real(ctx, rng, 1e-8, 1e8);
        Real b = rand_real(ctx, rng, 1e-8, 1e8);
        LogMag lhs = to_logmag(a * b);
        LogMag rhs = lm_mul(to_logmag(a), to_logmag(b));
        REQUIRE(lhs.sign == rhs.sign);
        REQUIRE(close_rel(lhs.logAbs, rhs.logAbs, tol));
    }
}

TEST_CASE("power law in the log domain", "[numerics][property]") {
    auto ctx = make_context(256);
    std::mt19937_64 rng(17);
    Real tol = Real::pow2(-200, 256);
    for (int i = 0; i < 200; ++i) {
        Real a = rand_real(ctx, rng, 1e-6, 1e6);
        Real e = rand_real(ctx, rng, -3.0, 3.0);
        LogMag lhs = to_logmag(pow(a, e));
        LogMag rhs = lm_pow(to_logmag(a), e);
        REQUIRE(lhs.sign == rhs.sign);
        REQUIRE(close_rel(lhs.logAbs, rhs.logAbs, tol));
    }
}

TEST_CASE("signed log-domain addition agrees with plain arithmetic", "[numerics]") {
    auto ctx = make_context(256);
    std::mt19937_64 rng(19);
    for (int i = 0; i < 200; ++i) {
        Real a = rand_real(ctx, rng, -100.0, 100.0);
        Real b = rand_real(ctx, rng, -100.0, 100.0);
        LogMag s = lm_add(to_logmag(a), to_logmag(b));
        REQUIRE(close_rel(from_logmag(s), a + b, ctx.eps(16)));
    }
    // huge dynamic range: 1e-4000 + 1e-4010 stays exact in the log domain
    LogMag tiny1{1, ctx.real(-4000) * log(ctx.real(10))};
    LogMag tiny2{1, ctx.real(-4010) * log(ctx.real(10))};
    LogMag sum = lm_add(tiny1, tiny2);
    CHECK(sum.sign == 1);
    Real expected = tiny1.logAbs + log(ctx.one() + exp(tiny2.logAbs - tiny1.logAbs));
    CHECK(close_rel(sum.logAbs, expected, ctx.eps(8)));
    // exact cancellation
    LogMag z = lm_add(tiny1, lm_neg(tiny1));
    CHECK(z.sign == 0);
}

TEST_CASE("log-domain comparisons are sign then magnitude", "[numerics]") {
    auto ctx = make_context(128);
    LogMag a{1, ctx.real(-5000)};
    LogMag b{1, ctx.real(-4000)};
    LogMag c{-1, ctx.real(9000)};
    LogMag z = LogMag::zero(128);
    CHECK(lm_abs_less(a, b));
    CHECK(lm_less(a, b));
    CHECK(lm_less(c, a));
    CHECK(lm_less(c, z));
    CHECK(lm_less(z, a));
    CHECK_FALSE(lm_less(b, a));
}

TEST_CASE("doubling precision reproduces values to the narrow width", "[numerics][property]") {
    auto ctx = make_context(256);
    auto wide = make_context(512);
    std::mt19937_64 rng(23);
    for (int i = 0; i < 50; ++i) {
        Real x = rand_real(ctx, rng, 0.001, 0.999);
        Real r = ctx.real("0.8");
        Real narrow = pow(x, r) + log(x) * exp(-x);
        Real w = pow(Real::from_str(x.str_hex(), 512), wide.real("0.8")) +
                 log(Real::from_str(x.str_hex(), 512)) * exp(-Real::from_str(x.str_hex(), 512));
        REQUIRE(close_rel(narrow, w, ctx.eps(8)));
    }
}
