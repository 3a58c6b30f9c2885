#include "kmcap/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace kmcap {

namespace {

// Kronrod 15 / Gauss 7 pair on [-1,1].
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkResult {
    double value;
    double err;
};

GkResult gk15(const std::function<double(double)>& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double kron = kWgk[7] * fc;
    double gauss = kWg[3] * fc;
    for (int j = 0; j < 7; ++j) {
        const double x = h * kXgk[j];
        const double fsum = f(c - x) + f(c + x);
        kron += kWgk[j] * fsum;
        if (j % 2 == 1) gauss += kWg[j / 2] * fsum;
    }
    kron *= h;
    gauss *= h;
    return {kron, std::abs(kron - gauss)};
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol, int max_subdiv) {
    if (a == b) return 0.0;
    struct Seg {
        double a, b, value, err;
    };
    GkResult first = gk15(f, a, b);
    std::vector<Seg> segs{{a, b, first.value, first.err}};
    double total = first.value;
    double toterr = first.err;
    int splits = 0;
    while (toterr > rel_tol * std::max(std::abs(total), 1e-300)) {
        if (++splits > max_subdiv)
            throw convergence_error("integrate: subdivision limit reached");
        // split the segment with the largest error
        size_t worst = 0;
        for (size_t i = 1; i < segs.size(); ++i)
            if (segs[i].err > segs[worst].err) worst = i;
        Seg s = segs[worst];
        const double mid = 0.5 * (s.a + s.b);
        if (mid <= s.a || mid >= s.b) break;  // interval exhausted at machine precision
        GkResult l = gk15(f, s.a, mid);
        GkResult r = gk15(f, mid, s.b);
        total += l.value + r.value - s.value;
        toterr += l.err + r.err - s.err;
        segs[worst] = {s.a, mid, l.value, l.err};
        segs.push_back({mid, s.b, r.value, r.err});
    }
    return total;
}

double integrate_semi_inf(const std::function<double(double)>& f, double a,
                          double rel_tol, std::vector<double> hints, int max_blocks) {
    hints.push_back(a + 1.0);
    std::sort(hints.begin(), hints.end());
    hints.erase(std::remove_if(hints.begin(), hints.end(),
                               [&](double h) { return !(h > a) || !std::isfinite(h); }),
                hints.end());
    hints.erase(std::unique(hints.begin(), hints.end()), hints.end());

    double total = 0.0;
    double lo = a;
    for (double h : hints) {
        total += integrate(f, lo, h, rel_tol);
        lo = h;
    }
    // geometric tail blocks
    double width = std::max(lo - a, 1.0);
    int quiet = 0;
    for (int blk = 0; blk < max_blocks; ++blk) {
        const double hi = lo + width;
        const double part = integrate(f, lo, hi, rel_tol);
        total += part;
        if (std::abs(part) < rel_tol * std::max(std::abs(total), 1e-300)) {
            if (++quiet >= 2) return total;
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    throw convergence_error("integrate_semi_inf: tail did not settle");
}

}  // namespace kmcap
