#include "qudit_qkd/threshold.hpp"

#include "qudit_qkd/field.hpp"
#include "qudit_qkd/kernels.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace qkd {

namespace {

void check_degree(int n) {
    if (n < 2)
        throw DomainError("tolerance function needs N >= 4 (n >= 2)");
}

double order_of(int n) { return std::ldexp(1.0, n); }

}  // namespace

double f_value(const FeasibilityPoint& p) {
    check_degree(p.n);
    const double order = order_of(p.n);
    const double t = 1 - p.e_b * p.e_c - order * (1 - p.e_c) / (order - 2) + 2 * p.e_11;
    return t * t - p.e_b * (1 - p.e_b) * p.e_c * p.e_c;
}

Rational f_value_exact(const Rational& e_b, const Rational& e_c, const Rational& e_11, int n) {
    check_degree(n);
    const Rational order(BigInt(1) << n);
    const Rational t = 1 - e_b * e_c - order * (1 - e_c) / (order - 2) + 2 * e_11;
    return t * t - e_b * (1 - e_b) * e_c * e_c;
}

double region_lhs(double e_b, double e_c, int n) {
    check_degree(n);
    const double order = order_of(n);
    return e_b * e_c + (order - 1) * (1 - e_c) / (order - 2);
}

const char* membership_name(RegionMembership m) {
    switch (m) {
    case RegionMembership::Inside: return "inside";
    case RegionMembership::Boundary: return "boundary";
    case RegionMembership::Outside: return "outside";
    }
    return "?";
}

RegionMembership classify_region(const FeasibilityPoint& p, double guard) {
    const double lhs = region_lhs(p.e_b, p.e_c, p.n);
    if (lhs < 0.5 - guard)
        return RegionMembership::Inside;
    if (lhs <= 0.5 + guard)
        return RegionMembership::Boundary;
    return RegionMembership::Outside;
}

bool in_region(const FeasibilityPoint& p, double guard) {
    return classify_region(p, guard) == RegionMembership::Inside;
}

bool in_region_exact(const Rational& e_b, const Rational& e_c, int n) {
    check_degree(n);
    const Rational order(BigInt(1) << n);
    return e_b * e_c + (order - 1) * (1 - e_c) / (order - 2) < Rational(1, 2);
}

double ec_star(double e_b, int n) {
    check_degree(n);
    const double order = order_of(n);
    return order / (2 * (order - 1 - (order - 2) * e_b));
}

Rational ec_star_exact(const Rational& e_b, int n) {
    check_degree(n);
    const Rational order(BigInt(1) << n);
    return order / (2 * (order - 1 - (order - 2) * e_b));
}

const char* row_status_name(RowStatus s) {
    switch (s) {
    case RowStatus::Feasible: return "feasible";
    case RowStatus::Boundary: return "boundary (f = 0)";
    case RowStatus::EmptySlice: return "empty-slice";
    case RowStatus::Counterexample: return "counterexample";
    }
    return "?";
}

ScanResult e_max_scan(int n, unsigned grid, unsigned e11_grid) {
    check_degree(n);
    if (grid < 2 || e11_grid < 1)
        throw UsageError("grid: need at least 2 points per axis");
    ScanResult out;
    out.n = n;
    out.grid = grid;
    out.e11_grid = e11_grid;
    out.resolution = 1.0 / grid;

    std::vector<double> e_c(grid + 1);
    for (unsigned j = 0; j <= grid; ++j)
        e_c[j] = static_cast<double>(j) / grid;

    const double order = order_of(n);
    double e_max = -1;
    bool contiguous = true;
    for (unsigned i = 0; i <= grid; ++i) {
        ScanRow row;
        row.e_b = static_cast<double>(i) / grid;
        row.min_f = std::numeric_limits<double>::infinity();
        row.analytic_min = row.e_b <= 0.5 ? f_value({row.e_b, ec_star(row.e_b, n), 0, n})
                                          : std::numeric_limits<double>::quiet_NaN();
        for (unsigned l = 0; l < e11_grid; ++l) {
            const double e11 = e11_grid == 1 ? 0.0 : static_cast<double>(l) / (e11_grid - 1);
            const auto s = kernels::f_slice({row.e_b, e11, order, kBoundaryGuard}, e_c);
            row.in_region_points += s.in_region;
            row.nonpositive_points += s.nonpositive;
            if (s.in_region && s.min_f < row.min_f) {
                row.min_f = s.min_f;
                row.witness_e_c = e_c[s.argmin];
                row.witness_e_11 = e11;
            }
        }
        out.points_checked += static_cast<std::uint64_t>(grid + 1) * e11_grid;

        if (row.in_region_points == 0) {
            // R forces e_b < 1/2; at exactly 1/2 the closure touches f = 0.
            const bool at_half = std::abs(row.e_b - 0.5) <= kBoundaryGuard;
            row.status = at_half ? RowStatus::Boundary : RowStatus::EmptySlice;
            row.min_f = at_half ? f_value({0.5, 1.0, 0.0, n}) : std::numeric_limits<double>::quiet_NaN();
            row.witness_e_c = 1.0;
            row.witness_e_11 = 0.0;
        } else if (row.nonpositive_points > 0 || !(row.analytic_min > 0)) {
            row.status = RowStatus::Counterexample;
            if (row.e_b < 0.5)
                out.no_counterexample = false;
        }
        if (row.status == RowStatus::Feasible && contiguous)
            e_max = row.e_b;
        else
            contiguous = false;
        out.rows.push_back(row);
    }
    out.e_max = e_max;
    return out;
}

std::string frontier_csv(const ScanResult& scan) {
    std::ostringstream os;
    os.precision(17);
    os << "e_b,min_f,analytic_min_f,feasible,status,in_region_points\n";
    for (const auto& r : scan.rows) {
        os << r.e_b << ',';
        if (std::isfinite(r.min_f))
            os << r.min_f;
        os << ',';
        if (std::isfinite(r.analytic_min))
            os << r.analytic_min;
        os << ',' << (r.status == RowStatus::Feasible ? 1 : 0) << ',' << row_status_name(r.status) << ','
           << r.in_region_points << '\n';
    }
    return os.str();
}

IffCheck verify_iff(int n, unsigned points) {
    check_degree(n);
    if (points < 1)
        throw UsageError("iff scan needs at least one point");
    IffCheck c;
    c.points = points + 1;
    for (unsigned k = 0; k < points; ++k) {
        const Rational e_b(k, 2 * points);
        const Rational f = f_value_exact(e_b, ec_star_exact(e_b, n), 0, n);
        if (f > 0)
            ++c.positive_below_half;
        else
            ++c.violations;
    }
    const Rational half(1, 2);
    c.nonpositive_at_half = f_value_exact(half, ec_star_exact(half, n), 0, n) <= 0;
    if (!c.nonpositive_at_half)
        ++c.violations;
    return c;
}

}  // namespace qkd
