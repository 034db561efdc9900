#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "core.hpp"

namespace singsusp {

enum class QuadStatus { Converged, ExceedsCap, NotConverged };

struct QuadResult {
    double value = 0;
    double lower = 0; // certified lower bound (accepted estimates + interval bounds)
    QuadStatus status = QuadStatus::Converged;
    int intervals = 0;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1,1]
inline constexpr double gk_x[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                   0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                   0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                   0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double gk_wk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double gk_wg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
void gk15(const F &f, double l, double r, double &kron, double &err)
{
    const double c = 0.5 * (l + r), h = 0.5 * (r - l);
    const double fc = f(c);
    double k = gk_wk[7] * fc, g = gk_wg[3] * fc;
    for (int j = 0; j < 7; ++j) {
        const double d = h * gk_x[j];
        const double s = f(c - d) + f(c + d);
        k += gk_wk[j] * s;
        if (j % 2 == 1) g += gk_wg[j / 2] * s;
    }
    kron = k * h;
    err = std::fabs((k - g) * h);
}

} // namespace detail

// Adaptive bisection with Gauss-Kronrod 7/15 on each piece. `lower(l,r)` must
// return a lower bound of the integral over [l,r]; once the accepted part plus
// the bounds of all pending pieces exceed `cap` the integral is reported as
// exceeding the cap.
template <class F, class Lower>
QuadResult adaptive_integrate(const F &f, const Lower &lower, double a, double b, double rel_tol, double abs_tol,
                              double cap, int max_intervals)
{
    QuadResult out;
    if (!(b > a)) return out;
    struct Item {
        double l, r, lb;
    };
    std::vector<Item> stack;
    stack.push_back({a, b, lower(a, b)});
    double pending_lb = stack.back().lb, accepted = 0;
    while (!stack.empty()) {
        if (accepted + pending_lb > cap) {
            out.status = QuadStatus::ExceedsCap;
            out.value = kInf;
            out.lower = accepted + pending_lb;
            return out;
        }
        Item it = stack.back();
        stack.pop_back();
        pending_lb -= it.lb;
        ++out.intervals;
        double est, err;
        detail::gk15(f, it.l, it.r, est, err);
        const double w = it.r - it.l;
        const double mid = 0.5 * (it.l + it.r);
        const bool tiny = !(mid > it.l && mid < it.r) || w <= 8 * std::numeric_limits<double>::epsilon() * std::fabs(mid);
        if (std::isfinite(est) && (err <= std::max({rel_tol * std::fabs(est), abs_tol * w, 1e-16}) || tiny)) {
            accepted += est;
            continue;
        }
        if (tiny) {
            // a node rounded onto an endpoint singularity; fall back to the bound
            if (std::isfinite(it.lb)) {
                accepted += it.lb;
                continue;
            }
            out.status = QuadStatus::NotConverged;
            out.value = accepted;
            return out;
        }
        if (out.intervals >= max_intervals) {
            out.status = QuadStatus::NotConverged;
            out.value = accepted + est;
            return out;
        }
        Item lo{it.l, mid, lower(it.l, mid)}, hi{mid, it.r, lower(mid, it.r)};
        pending_lb += lo.lb + hi.lb;
        stack.push_back(hi);
        stack.push_back(lo);
    }
    out.value = accepted;
    out.lower = accepted;
    return out;
}

} // namespace singsusp
