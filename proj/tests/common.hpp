#pragma once

#include <random>
#include <string>

#include <catch_amalgamated.hpp>

#include "isokit/isokit.hpp"

#ifndef ISOKIT_FIXTURES
#define ISOKIT_FIXTURES "fixtures"
#endif

inline isokit::ChainModel fixture(const std::string& name) {
  return isokit::load_model(std::string(ISOKIT_FIXTURES) + "/" + name);
}

inline auto near(double expected, double tol = 1e-12) { return Catch::Matchers::WithinAbs(expected, tol); }

/// Random reversible models with a fixed seed per test.
inline std::mt19937_64 test_rng(std::uint64_t seed) { return std::mt19937_64(seed); }
