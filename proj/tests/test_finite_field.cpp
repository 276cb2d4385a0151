#include "rbc/finite_field.hpp"
#include "rbc/random.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

using namespace rbc;

namespace {

// Reference arithmetic over unsigned __int128, independent of the library path.
std::uint64_t ref_mul(std::uint64_t a, std::uint64_t b, std::uint64_t q) {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % q);
}

bool trial_division_prime(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t d = 2; d * d <= n; ++d) {
        if (n % d == 0) return false;
    }
    return true;
}

}  // namespace

TEST(FieldSpec, PrimalityMatchesTrialDivision) {
    for (std::uint64_t n = 0; n < 5000; ++n) EXPECT_EQ(is_prime(n), trial_division_prime(n)) << n;
    EXPECT_TRUE(is_prime(2147483647ULL));
    EXPECT_TRUE(is_prime(2305843009213693951ULL));  // 2^61 - 1
    EXPECT_FALSE(is_prime(2305843009213693953ULL));
    EXPECT_FALSE(is_prime(3215031751ULL));  // strong pseudoprime to bases 2, 3, 5, 7
}

TEST(FieldSpec, RejectsCompositeAndOutOfRange) {
    EXPECT_THROW(FieldSpec(0), std::domain_error);
    EXPECT_THROW(FieldSpec(1), std::domain_error);
    EXPECT_THROW(FieldSpec(4), std::domain_error);
    EXPECT_THROW(FieldSpec(561), std::domain_error);
    EXPECT_THROW(FieldSpec((std::uint64_t{1} << 63) + 29), std::domain_error);
    EXPECT_NO_THROW(FieldSpec(2));
    EXPECT_NO_THROW(FieldSpec(9223372036854775783ULL));  // largest prime below 2^63
}

TEST(FieldArith, SpecExamples) {
    FieldSpec f5(5), f11(11);
    EXPECT_EQ(fe_arith(f5.element(3), f5.element(4), FieldOp::add).value(), 2U);
    EXPECT_EQ(fe_arith(f11.element(5), f11.element(7), FieldOp::mul).value(), 2U);
    for (std::uint64_t x = 0; x < 11; ++x) {
        EXPECT_EQ(fe_arith(f11.element(x), f11.zero(), FieldOp::mul).value(), 0U);
    }
    EXPECT_EQ(fe_arith(f5.element(1), f5.element(3), FieldOp::sub).value(), 3U);
}

TEST(FieldArith, MixedFieldsAreAUsageError) {
    FieldSpec f5(5), f7(7);
    EXPECT_THROW(fe_arith(f5.element(1), f7.element(1), FieldOp::add), usage_error);
    EXPECT_THROW(fe_arith(f5.element(1), f7.element(1), FieldOp::mul), usage_error);
    EXPECT_FALSE(f5.element(1) == f7.element(1));
}

TEST(FieldInverse, SpecExamples) {
    EXPECT_EQ(fe_inv(FieldSpec(5).element(2)).value(), 3U);
    EXPECT_EQ(fe_inv(FieldSpec(11).element(7)).value(), 8U);
    for (std::uint64_t q : {2ULL, 3ULL, 101ULL, 2147483647ULL}) EXPECT_EQ(fe_inv(FieldSpec(q).one()).value(), 1U);
    EXPECT_THROW(fe_inv(FieldSpec(7).zero()), std::domain_error);
}

TEST(FieldInverse, InvolutionExhaustive) {
    for (std::uint64_t q = 2; q <= 101; ++q) {
        if (!trial_division_prime(q)) continue;
        FieldSpec f(q);
        for (std::uint64_t a = 1; a < q; ++a) {
            const FieldElement x = f.element(a);
            EXPECT_EQ(ref_mul(a, fe_inv(x).value(), q), 1U);
            EXPECT_EQ(fe_inv(fe_inv(x)), x);
        }
    }
}

TEST(FieldArith, AddSubRoundTripExhaustive) {
    for (std::uint64_t q = 2; q <= 31; ++q) {
        if (!trial_division_prime(q)) continue;
        FieldSpec f(q);
        for (std::uint64_t a = 0; a < q; ++a) {
            for (std::uint64_t b = 0; b < q; ++b) {
                EXPECT_EQ(((f.element(a) + f.element(b)) - f.element(b)).value(), a);
                EXPECT_EQ((f.element(a) + f.element(b)).value(), (a + b) % q);
            }
        }
    }
}

TEST(FieldArith, AxiomsOnRandomTriples) {
    for (std::uint64_t q : {2ULL, 3ULL, 5ULL, 11ULL, 2147483647ULL}) {
        FieldSpec f(q);
        SplitMix64 rng(derive_seed(17, StreamTag::fuzz, q));
        for (int i = 0; i < 10000; ++i) {
            const FieldElement a = fe_sample(f, rng), b = fe_sample(f, rng), c = fe_sample(f, rng);
            ASSERT_EQ((a + b) + c, a + (b + c));
            ASSERT_EQ((a * b) * c, a * (b * c));
            ASSERT_EQ(a + b, b + a);
            ASSERT_EQ(a * b, b * a);
            ASSERT_EQ(a * (b + c), a * b + a * c);
            ASSERT_EQ((a * b).value(), ref_mul(a.value(), b.value(), q));
            ASSERT_LT((a - b).value(), q);
        }
    }
}

TEST(FieldArith, LargeModulusProducts) {
    const std::uint64_t q = 9223372036854775783ULL;
    FieldSpec f(q);
    SplitMix64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        const FieldElement a = fe_sample(f, rng), b = fe_sample(f, rng);
        ASSERT_EQ((a * b).value(), ref_mul(a.value(), b.value(), q));
        ASSERT_EQ((a + b).value(), static_cast<std::uint64_t>((static_cast<unsigned __int128>(a.value()) + b.value()) % q));
        if (!a.is_zero()) ASSERT_EQ((a * fe_inv(a)).value(), 1U);
    }
}

TEST(FieldSample, DeterministicGivenSeed) {
    FieldSpec f(2147483647);
    SplitMix64 r1(42), r2(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(fe_sample(f, r1), fe_sample(f, r2));
}

TEST(FieldSample, BinaryMean) {
    FieldSpec f(2);
    SplitMix64 rng(7);
    double sum = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(fe_sample(f, rng).value());
    EXPECT_GE(sum / n, 0.45);
    EXPECT_LE(sum / n, 0.55);
}

TEST(FieldSample, ResidueFrequenciesWithinFiveSigma) {
    FieldSpec f(5);
    SplitMix64 rng(11);
    const int n = 100000;
    std::vector<int> counts(5);
    for (int i = 0; i < n; ++i) ++counts[fe_sample(f, rng).value()];
    const double sigma = std::sqrt(n * 0.2 * 0.8);
    for (int c : counts) EXPECT_LE(std::abs(c - n * 0.2), 5 * sigma);
}

TEST(FieldSample, NoModuloBiasForLargeBound) {
    // bound just above 2^63 makes plain modulo reduction put twice the mass below 2^64 - bound.
    const std::uint64_t bound = (std::uint64_t{1} << 63) + 1;
    SplitMix64 rng(3);
    int low = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) low += uniform_below(rng, bound) < (std::uint64_t{1} << 62) ? 1 : 0;
    EXPECT_NEAR(static_cast<double>(low) / n, 0.5, 0.02);
}
