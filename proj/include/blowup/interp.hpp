#pragma once

// Piecewise-linear interpolation on one spatial slice and bilinear
// interpolation on the space-time sheet spanned by two consecutive slices.
// Queries landing exactly on a cell edge resolve to the left/lower cell;
// queries outside the covered rectangle throw std::out_of_range.
//
// Spatial evaluation is arranged so that querying a symmetric slice at +x
// and -x returns bit-identical values: the cell is located in signed node
// coordinates (where the mirrored fraction is exactly 1 - fr) and the two
// node weights are applied as separately rounded products whose sum is
// commutative.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace blowup {

struct SpaceTimeSheet {
    const std::vector<double>* lo = nullptr; // slice at t_lo
    const std::vector<double>* hi = nullptr; // slice at t_lo + tau
    double h = 0.0;
    double t_lo = 0.0;
    double tau = 0.0;
};

namespace detail {

// Map a signed node coordinate to (cell node index, fraction) on nodes
// -half..half, resolving exact edges to the left cell and tolerating ~1 ulp
// of boundary noise.
inline void locate(double qs, int half, int& i0, double& fr) {
    const double eps = 16.0 * 1e-16 * (half + 1);
    if (qs < -half - eps || qs > half + eps)
        throw std::out_of_range("interp: coordinate outside grid");
    if (qs <= -half) { i0 = -half; fr = 0.0; return; }
    if (qs >= half) { i0 = half - 1; fr = 1.0; return; }
    const double f = std::floor(qs);
    i0 = static_cast<int>(f);
    fr = qs - f; // exact: f and qs share an exponent window
    if (fr == 0.0) { --i0; fr = 1.0; } // left cell on exact edges
}

// (1-fr)*a + fr*b as two independently rounded products; their sum is
// commutative, which is what makes mirrored queries bit-identical.
inline double weigh(double a, double b, double fr) {
    const double wa = (1.0 - fr) * a;
    const double wb = fr * b;
    return wa + wb;
}

} // namespace detail

// x is measured from the grid center; the slice covers [-half*h, half*h].
inline double interp_space(const std::vector<double>& slice, double h,
                           double x) {
    const int half = static_cast<int>(slice.size() - 1) / 2;
    int i0;
    double fr;
    detail::locate(x / h, half, i0, fr);
    return detail::weigh(slice[half + i0], slice[half + i0 + 1], fr);
}

inline double interp_space_time(const SpaceTimeSheet& sheet, double x,
                                double t) {
    const int half = static_cast<int>(sheet.lo->size() - 1) / 2;
    int i0;
    double fx;
    detail::locate(x / sheet.h, half, i0, fx);
    double ft = (t - sheet.t_lo) / sheet.tau;
    const double eps = 16.0 * 1e-16 * std::max(1.0, std::abs(t / sheet.tau));
    if (ft < -eps || ft > 1.0 + eps)
        throw std::out_of_range("interp: time outside sheet");
    if (ft < 0.0) ft = 0.0;
    if (ft > 1.0) ft = 1.0;
    const int a = half + i0;
    const double vlo = detail::weigh((*sheet.lo)[a], (*sheet.lo)[a + 1], fx);
    const double vhi = detail::weigh((*sheet.hi)[a], (*sheet.hi)[a + 1], fx);
    return detail::weigh(vlo, vhi, ft);
}

} // namespace blowup
