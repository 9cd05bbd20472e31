#pragma once

// Tolerable bit error rate: the sufficient condition f(e_b, e_c, e_11) > 0,
// the region R of parameters that pass the continuation test, the minimizer
// e_c*(e_b) and a grid scan for e_max.

#include "qudit_qkd/rational.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qkd {

inline constexpr double kBoundaryGuard = 1e-9;

struct FeasibilityPoint {
    double e_b = 0;
    double e_c = 1;
    double e_11 = 0;
    int n = 2;
};

/// [1 - e_b e_c - N(1-e_c)/(N-2) + 2 e_11]^2 - e_b(1-e_b) e_c^2.
double f_value(const FeasibilityPoint& p);
Rational f_value_exact(const Rational& e_b, const Rational& e_c, const Rational& e_11, int n);

/// e_b e_c + (N-1)(1-e_c)/(N-2).
double region_lhs(double e_b, double e_c, int n);

enum class RegionMembership { Inside, Boundary, Outside };
const char* membership_name(RegionMembership m);

/// Double-precision membership with a guard band around LHS = 1/2.
RegionMembership classify_region(const FeasibilityPoint& p, double guard = kBoundaryGuard);
/// Strict membership (LHS < 1/2 - guard).
bool in_region(const FeasibilityPoint& p, double guard = kBoundaryGuard);
bool in_region_exact(const Rational& e_b, const Rational& e_c, int n);

/// N / [2(N - 1 - (N-2) e_b)], the e_c on the region boundary where
/// f(e_b, ., 0) is smallest. Defined for e_b in [0, 1/2].
double ec_star(double e_b, int n);
Rational ec_star_exact(const Rational& e_b, int n);

enum class RowStatus { Feasible, Boundary, EmptySlice, Counterexample };
const char* row_status_name(RowStatus s);

struct ScanRow {
    double e_b = 0;
    /// Smallest sampled f over in-region (e_c, e_11) grid points.
    double min_f = 0;
    /// f(e_b, e_c*(e_b), 0): infimum over the whole slice (NaN when e_b > 1/2).
    double analytic_min = 0;
    std::uint64_t in_region_points = 0;
    std::uint64_t nonpositive_points = 0;
    RowStatus status = RowStatus::Feasible;
    /// Point realising min_f (or the boundary witness).
    double witness_e_c = 0;
    double witness_e_11 = 0;
};

struct ScanResult {
    int n = 2;
    unsigned grid = 0;
    unsigned e11_grid = 0;
    double e_max = 0;
    double resolution = 0;
    /// No sampled in-region point with e_b < 1/2 has f <= 0.
    bool no_counterexample = true;
    std::uint64_t points_checked = 0;
    std::vector<ScanRow> rows;
};

/// e_b and e_c on grid+1 points over [0, 1]; e_11 on e11_grid points over
/// [0, 1]. Uses the SIMD slice kernel.
ScanResult e_max_scan(int n, unsigned grid, unsigned e11_grid = 101);

std::string frontier_csv(const ScanResult& scan);

struct IffCheck {
    unsigned points = 0;
    unsigned positive_below_half = 0;
    unsigned violations = 0;
    bool nonpositive_at_half = false;
};

/// Exact check of f(e_b, e_c*(e_b), 0) > 0 for e_b = k/(2 points), k < points,
/// and <= 0 at e_b = 1/2.
IffCheck verify_iff(int n, unsigned points);

}  // namespace qkd
