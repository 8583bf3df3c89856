// Split-operator spectral solver for the two-dimensional Schroedinger
// equation of the coupled oscillators,
//
//     i hbar d psi/dt = [ p_A^2/2 + p_x^2/2 + (m^2 + e^2 A^2) x^2 / 2 ] psi,
//
// on a periodic box [-L_A, L_A) x [-L_x, L_x). Amplitudes are row-major with
// A as the slow axis. The Strang step is V/2 - T - V/2; the fourth-order step
// composes three Strang steps with the Composition4 weights.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fftw3.h>

#include "errors.hpp"
#include "integrators.hpp"
#include "model.hpp"

namespace sqchaos {

using cplx = std::complex<double>;

/// Allocator backed by fftw_malloc so every buffer shares FFTW's alignment.
template <class T>
struct fftw_allocator {
    using value_type = T;
    fftw_allocator() = default;
    template <class U>
    fftw_allocator(const fftw_allocator<U>&) noexcept {}
    T* allocate(std::size_t n) {
        void* p = fftw_malloc(n * sizeof(T));
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }
    template <class U>
    bool operator==(const fftw_allocator<U>&) const noexcept { return true; }
};

using AmplitudeBuffer = std::vector<cplx, fftw_allocator<cplx>>;

struct Grid2D {
    std::size_t n_A = 256;
    std::size_t n_x = 256;
    double L_A = 16.0;
    double L_x = 8.0;

    void validate() const {
        auto pow2 = [](std::size_t n) { return n >= 16 && (n & (n - 1)) == 0; };
        if (!pow2(n_A) || !pow2(n_x)) throw std::domain_error("Grid2D: sizes must be powers of two >= 16");
        if (!(L_A > 0.0) || !(L_x > 0.0)) throw std::domain_error("Grid2D: half-widths must be > 0");
    }
    double dA() const { return 2.0 * L_A / static_cast<double>(n_A); }
    double dx() const { return 2.0 * L_x / static_cast<double>(n_x); }
    double A(std::size_t i) const { return -L_A + static_cast<double>(i) * dA(); }
    double x(std::size_t j) const { return -L_x + static_cast<double>(j) * dx(); }

    /// FFT-ordered wavenumber: {0, 1, ..., n/2-1, -n/2, ..., -1} * pi / L.
    static double wavenumber(std::size_t i, std::size_t n, double L) {
        const auto half = static_cast<std::ptrdiff_t>(n / 2);
        auto j = static_cast<std::ptrdiff_t>(i);
        if (j >= half) j -= static_cast<std::ptrdiff_t>(n);
        return static_cast<double>(j) * std::numbers::pi / L;
    }
    double kA(std::size_t i) const { return wavenumber(i, n_A, L_A); }
    double kx(std::size_t j) const { return wavenumber(j, n_x, L_x); }
    std::size_t size() const { return n_A * n_x; }
};

struct WaveFunction2D {
    Grid2D grid;
    AmplitudeBuffer amplitudes;
    double t = 0.0;

    cplx& at(std::size_t i, std::size_t j) { return amplitudes[i * grid.n_x + j]; }
    const cplx& at(std::size_t i, std::size_t j) const { return amplitudes[i * grid.n_x + j]; }
};

/// Product Gaussian parameters. Each factor is
///   exp[-(xi - q)^2 (1/(4W) - i Pi)/hbar + i p (xi - q)/hbar]
/// with width parameter W, so the variance of the factor is hbar W.
struct GaussianInitParams {
    double A0 = 0.0;
    double pA0 = 0.0;
    double x0 = 0.0;
    double p0 = 0.0;
    double D0 = 0.5;
    double G0 = 0.5;
    double PiD0 = 0.0;
    double PiG0 = 0.0;
};

/// Gaussian whose expectation values reproduce a Hartree mean-field state.
inline GaussianInitParams gaussian_from_state(const MeanFieldState& s, double hbar) {
    if (!s.has_d_sector()) throw std::invalid_argument("gaussian_from_state: needs a state with a D sector");
    const WidthView w = to_width_view(s, hbar);
    GaussianInitParams g;
    g.A0 = w.A;
    g.pA0 = w.pA;
    g.D0 = w.D;
    g.G0 = w.G;
    g.PiD0 = w.Pi_D;
    g.PiG0 = w.Pi_G;
    return g;
}

struct ObservableRecord {
    double t = 0.0;
    double mean_A = 0.0;
    double mean_pA = 0.0;
    double var_A = 0.0;
    double mean_x = 0.0;
    double var_x = 0.0;
    double norm = 0.0;
    double energy = 0.0;
};

struct ObservableSeries {
    std::vector<ObservableRecord> records;
    std::optional<double> aborted;
    std::optional<double> escape_time; ///< first record with edge probability above tolerance
    double max_edge_probability = 0.0;
    std::string abort_reason;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

inline double gaussian_norm_factor(double variance) {
    return std::pow(2.0 * std::numbers::pi * variance, -0.25);
}

} // namespace detail

inline WaveFunction2D gaussian_init(const Grid2D& g, const GaussianInitParams& ip, const ModelParams& p) {
    g.validate();
    p.validate();
    if (!(ip.D0 > 0.0) || !(ip.G0 > 0.0)) throw std::domain_error("gaussian_init: widths must be > 0");
    const double h = p.hbar;
    const double var_a = h * ip.D0, var_x = h * ip.G0;
    const double margin_a = g.L_A - (std::abs(ip.A0) + 8.0 * std::sqrt(var_a));
    const double margin_x = g.L_x - (std::abs(ip.x0) + 8.0 * std::sqrt(var_x));
    if (margin_a < 0.0 || margin_x < 0.0) {
        std::ostringstream os;
        os << "gaussian_init: packet too wide for box (margin A " << margin_a << ", margin x " << margin_x << ")";
        throw std::domain_error(os.str());
    }
    WaveFunction2D wf;
    wf.grid = g;
    wf.amplitudes.assign(g.size(), cplx(0.0, 0.0));
    std::vector<cplx> fa(g.n_A), fx(g.n_x);
    const cplx I(0.0, 1.0);
    for (std::size_t i = 0; i < g.n_A; ++i) {
        const double d = g.A(i) - ip.A0;
        fa[i] = detail::gaussian_norm_factor(var_a)
              * std::exp(-(d * d) * (1.0 / (4.0 * ip.D0) - I * ip.PiD0) / h + I * ip.pA0 * d / h);
    }
    for (std::size_t j = 0; j < g.n_x; ++j) {
        const double d = g.x(j) - ip.x0;
        fx[j] = detail::gaussian_norm_factor(var_x)
              * std::exp(-(d * d) * (1.0 / (4.0 * ip.G0) - I * ip.PiG0) / h + I * ip.p0 * d / h);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < g.n_A; ++i)
        for (std::size_t j = 0; j < g.n_x; ++j) {
            wf.at(i, j) = fa[i] * fx[j];
            norm += std::norm(wf.at(i, j));
        }
    norm *= g.dA() * g.dx();
    const double scale = 1.0 / std::sqrt(norm);
    for (auto& a : wf.amplitudes) a *= scale;
    return wf;
}

/// Per-evolution FFT plans, phase tables and workspace. Not shareable across
/// threads; construct one per concurrent evolution.
class SplitOperator {
public:
    SplitOperator(const Grid2D& grid, const ModelParams& p) : grid_(grid), params_(p) {
        grid_.validate();
        params_.validate();
        work_.assign(grid_.size(), cplx(0.0, 0.0));
        AmplitudeBuffer scratch(grid_.size());
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        const int na = static_cast<int>(grid_.n_A), nx = static_cast<int>(grid_.n_x);
        forward_ = fftw_plan_dft_2d(na, nx, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_2d(na, nx, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
        if (!forward_ || !backward_) throw std::runtime_error("SplitOperator: FFTW planning failed");
    }
    ~SplitOperator() {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        if (forward_) fftw_destroy_plan(forward_);
        if (backward_) fftw_destroy_plan(backward_);
    }
    SplitOperator(const SplitOperator&) = delete;
    SplitOperator& operator=(const SplitOperator&) = delete;

    const Grid2D& grid() const { return grid_; }
    const ModelParams& params() const { return params_; }

    double potential(double A, double x) const {
        return 0.5 * (params_.m * params_.m + params_.e * params_.e * A * A) * x * x;
    }

    /// exp(-i V dt / 2 hbar), FFT, exp(-i hbar k^2 dt / 2), inverse FFT,
    /// exp(-i V dt / 2 hbar).
    void step_strang(WaveFunction2D& wf, double dt) {
        check_grid(wf);
        auto* data = reinterpret_cast<fftw_complex*>(wf.amplitudes.data());
        const std::size_t n = grid_.size();
        const AmplitudeBuffer& half = kick_table(0.5 * dt);
        for (std::size_t k = 0; k < n; ++k) wf.amplitudes[k] *= half[k];
        fftw_execute_dft(forward_, data, data);
        const AmplitudeBuffer& drift = drift_table(dt);
        for (std::size_t k = 0; k < n; ++k) wf.amplitudes[k] *= drift[k];
        fftw_execute_dft(backward_, data, data);
        for (std::size_t k = 0; k < n; ++k) wf.amplitudes[k] *= half[k];
        wf.t += dt;
    }

    void step_order4(WaveFunction2D& wf, double dt) {
        const double t0 = wf.t;
        step_strang(wf, composition4::w_outer * dt);
        step_strang(wf, composition4::w_inner * dt);
        step_strang(wf, composition4::w_outer * dt);
        wf.t = t0 + dt;
    }

    /// n consecutive steps with adjacent half-kicks merged into one kick.
    /// Agrees with n calls of step() up to round-off.
    void advance(WaveFunction2D& wf, double dt, Scheme scheme, std::size_t n) {
        check_grid(wf);
        if (n == 0) return;
        std::vector<double> sub;
        if (scheme == Scheme::Leapfrog2)
            sub = {dt};
        else if (scheme == Scheme::Composition4)
            sub = {composition4::w_outer * dt, composition4::w_inner * dt, composition4::w_outer * dt};
        else
            throw std::invalid_argument("SplitOperator: RK4 is not a split-operator scheme");
        const double t0 = wf.t;
        auto* data = reinterpret_cast<fftw_complex*>(wf.amplitudes.data());
        const std::size_t len = grid_.size();
        const std::size_t m = sub.size();
        for (std::size_t s = 0; s < n * m; ++s) {
            const double tau = sub[s % m];
            const double before = s == 0 ? 0.5 * tau : 0.5 * (sub[(s - 1) % m] + tau);
            const AmplitudeBuffer& kick = kick_table(before);
            for (std::size_t k = 0; k < len; ++k) wf.amplitudes[k] *= kick[k];
            fftw_execute_dft(forward_, data, data);
            const AmplitudeBuffer& drift = drift_table(tau);
            for (std::size_t k = 0; k < len; ++k) wf.amplitudes[k] *= drift[k];
            fftw_execute_dft(backward_, data, data);
        }
        const AmplitudeBuffer& last = kick_table(0.5 * sub[m - 1]);
        for (std::size_t k = 0; k < len; ++k) wf.amplitudes[k] *= last[k];
        wf.t = t0 + static_cast<double>(n) * dt;
    }

    void step(WaveFunction2D& wf, double dt, Scheme scheme) {
        if (scheme == Scheme::Leapfrog2)
            step_strang(wf, dt);
        else if (scheme == Scheme::Composition4)
            step_order4(wf, dt);
        else
            throw std::invalid_argument("SplitOperator: RK4 is not a split-operator scheme");
    }

    double norm(const WaveFunction2D& wf) const {
        double s = 0.0;
        for (const auto& a : wf.amplitudes) s += std::norm(a);
        return s * grid_.dA() * grid_.dx();
    }

    /// Moments by quadrature, momentum moments spectrally. Throws
    /// integrity_error when the norm is off by more than 1e-6.
    ObservableRecord observe(const WaveFunction2D& wf) {
        check_grid(wf);
        ObservableRecord r;
        r.t = wf.t;
        const double cell = grid_.dA() * grid_.dx();
        double s0 = 0, sa = 0, saa = 0, sx = 0, sxx = 0, sv = 0;
        for (std::size_t i = 0; i < grid_.n_A; ++i) {
            const double a = grid_.A(i);
            double row = 0, rx = 0, rxx = 0, rv = 0;
            for (std::size_t j = 0; j < grid_.n_x; ++j) {
                const double w = std::norm(wf.at(i, j));
                const double x = grid_.x(j);
                row += w;
                rx += w * x;
                rxx += w * x * x;
                rv += w * potential(a, x);
            }
            s0 += row;
            sa += row * a;
            saa += row * a * a;
            sx += rx;
            sxx += rxx;
            sv += rv;
        }
        r.norm = s0 * cell;
        if (!(std::abs(r.norm - 1.0) <= 1e-6)) {
            std::ostringstream os;
            os << "wavefunction norm " << r.norm << " deviates from 1 by more than 1e-6 at t = " << wf.t;
            throw integrity_error(os.str());
        }
        r.mean_A = sa / s0;
        r.var_A = saa / s0 - r.mean_A * r.mean_A;
        r.mean_x = sx / s0;
        r.var_x = sxx / s0 - r.mean_x * r.mean_x;

        std::copy(wf.amplitudes.begin(), wf.amplitudes.end(), work_.begin());
        auto* data = reinterpret_cast<fftw_complex*>(work_.data());
        fftw_execute_dft(forward_, data, data);
        double k0 = 0, kp = 0, kk = 0;
        const double h = params_.hbar;
        for (std::size_t i = 0; i < grid_.n_A; ++i) {
            const double ka = grid_.kA(i);
            for (std::size_t j = 0; j < grid_.n_x; ++j) {
                const double w = std::norm(work_[i * grid_.n_x + j]);
                const double kx = grid_.kx(j);
                k0 += w;
                kp += w * ka;
                kk += w * (ka * ka + kx * kx);
            }
        }
        r.mean_pA = h * kp / k0;
        r.energy = 0.5 * h * h * kk / k0 + sv / s0;
        return r;
    }

    /// <xi p + p xi> along one axis (0 = A, 1 = x), computed spectrally.
    double symmetrized_moment(const WaveFunction2D& wf, int axis) {
        check_grid(wf);
        std::copy(wf.amplitudes.begin(), wf.amplitudes.end(), work_.begin());
        auto* data = reinterpret_cast<fftw_complex*>(work_.data());
        fftw_execute_dft(forward_, data, data);
        const double scale = 1.0 / static_cast<double>(grid_.size());
        for (std::size_t i = 0; i < grid_.n_A; ++i)
            for (std::size_t j = 0; j < grid_.n_x; ++j) {
                const double k = axis == 0 ? grid_.kA(i) : grid_.kx(j);
                work_[i * grid_.n_x + j] *= params_.hbar * k * scale;
            }
        fftw_execute_dft(backward_, data, data);
        double num = 0, den = 0;
        for (std::size_t i = 0; i < grid_.n_A; ++i)
            for (std::size_t j = 0; j < grid_.n_x; ++j) {
                const double xi = axis == 0 ? grid_.A(i) : grid_.x(j);
                num += xi * (std::conj(wf.at(i, j)) * work_[i * grid_.n_x + j]).real();
                den += std::norm(wf.at(i, j));
            }
        return 2.0 * num / den;
    }

    /// Probability mass within `cells` grid cells of any box edge.
    double edge_probability(const WaveFunction2D& wf, std::size_t cells = 4) const {
        double s = 0.0;
        for (std::size_t i = 0; i < grid_.n_A; ++i)
            for (std::size_t j = 0; j < grid_.n_x; ++j) {
                const bool edge = i < cells || i >= grid_.n_A - cells || j < cells || j >= grid_.n_x - cells;
                if (edge) s += std::norm(wf.at(i, j));
            }
        return s * grid_.dA() * grid_.dx();
    }

private:
    void check_grid(const WaveFunction2D& wf) const {
        if (wf.grid.n_A != grid_.n_A || wf.grid.n_x != grid_.n_x || wf.grid.L_A != grid_.L_A ||
            wf.grid.L_x != grid_.L_x || wf.amplitudes.size() != grid_.size())
            throw std::invalid_argument("SplitOperator: wavefunction grid does not match solver grid");
    }

    /// exp(-i V tau / hbar) on the position grid.
    const AmplitudeBuffer& kick_table(double tau) {
        auto it = kicks_.find(tau);
        if (it != kicks_.end()) return it->second;
        if (kicks_.size() >= 8) kicks_.clear();
        AmplitudeBuffer tb(grid_.size());
        for (std::size_t i = 0; i < grid_.n_A; ++i) {
            const double a = grid_.A(i);
            for (std::size_t j = 0; j < grid_.n_x; ++j)
                tb[i * grid_.n_x + j] = std::polar(1.0, -potential(a, grid_.x(j)) * tau / params_.hbar);
        }
        return kicks_.emplace(tau, std::move(tb)).first->second;
    }

    /// exp(-i hbar k^2 tau / 2) on the wavenumber grid, with the 1/N of the
    /// unnormalized inverse transform folded in.
    const AmplitudeBuffer& drift_table(double tau) {
        auto it = drifts_.find(tau);
        if (it != drifts_.end()) return it->second;
        if (drifts_.size() >= 8) drifts_.clear();
        AmplitudeBuffer tb(grid_.size());
        const double scale = 1.0 / static_cast<double>(grid_.size());
        for (std::size_t i = 0; i < grid_.n_A; ++i) {
            const double ka = grid_.kA(i);
            for (std::size_t j = 0; j < grid_.n_x; ++j) {
                const double kx = grid_.kx(j);
                tb[i * grid_.n_x + j] = std::polar(scale, -0.5 * params_.hbar * (ka * ka + kx * kx) * tau);
            }
        }
        return drifts_.emplace(tau, std::move(tb)).first->second;
    }

    Grid2D grid_;
    ModelParams params_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
    AmplitudeBuffer work_;
    std::map<double, AmplitudeBuffer> kicks_;
    std::map<double, AmplitudeBuffer> drifts_;
};

/// One-shot conveniences; plan a fresh solver per call.
inline WaveFunction2D step_strang(WaveFunction2D wf, const ModelParams& p, double dt) {
    SplitOperator op(wf.grid, p);
    op.step_strang(wf, dt);
    return wf;
}

inline WaveFunction2D step_order4(WaveFunction2D wf, const ModelParams& p, double dt) {
    SplitOperator op(wf.grid, p);
    op.step_order4(wf, dt);
    return wf;
}

inline ObservableRecord observe(const WaveFunction2D& wf, const ModelParams& p) {
    SplitOperator op(wf.grid, p);
    return op.observe(wf);
}

/// A-marginal density P(A_i) = sum_j |psi_ij|^2 dx.
inline std::vector<double> a_marginal(const WaveFunction2D& wf) {
    std::vector<double> out(wf.grid.n_A, 0.0);
    for (std::size_t i = 0; i < wf.grid.n_A; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < wf.grid.n_x; ++j) s += std::norm(wf.at(i, j));
        out[i] = s * wf.grid.dx();
    }
    return out;
}

struct MarginalShape {
    double mean = 0.0;
    double variance = 0.0;
    double excess_kurtosis = 0.0;
    double l1_from_gaussian = 0.0; ///< L1 distance to the moment-matched Gaussian
    double integral = 0.0;
};

inline MarginalShape marginal_shape(const std::vector<double>& density, const Grid2D& g) {
    MarginalShape ms;
    const double da = g.dA();
    double s0 = 0, s1 = 0;
    for (std::size_t i = 0; i < density.size(); ++i) {
        s0 += density[i];
        s1 += density[i] * g.A(i);
    }
    ms.integral = s0 * da;
    ms.mean = s1 / s0;
    double m2 = 0, m4 = 0;
    for (std::size_t i = 0; i < density.size(); ++i) {
        const double d = g.A(i) - ms.mean;
        m2 += density[i] * d * d;
        m4 += density[i] * d * d * d * d;
    }
    m2 /= s0;
    m4 /= s0;
    ms.variance = m2;
    ms.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    double l1 = 0.0;
    for (std::size_t i = 0; i < density.size(); ++i) {
        const double d = g.A(i) - ms.mean;
        const double gauss = std::exp(-d * d / (2.0 * m2)) / std::sqrt(2.0 * std::numbers::pi * m2);
        l1 += std::abs(density[i] / (s0 * da) - gauss);
    }
    ms.l1_from_gaussian = l1 * da;
    return ms;
}

/// What evolve does once the edge probability exceeds the tolerance.
enum class EscapePolicy { Abort, Record };

struct EvolveOptions {
    int observer_stride = 1;
    double edge_tolerance = 1e-8;
    std::size_t edge_cells = 4;
    EscapePolicy on_escape = EscapePolicy::Abort;
};

/// Marches wf in place, recording observables every observer_stride steps.
/// Edge probability is checked at every record. Under EscapePolicy::Abort the
/// march stops with ObservableSeries::aborted set; under Record the first
/// escape time is kept in escape_time and the march continues.
inline ObservableSeries evolve(WaveFunction2D& wf, SplitOperator& op, const IntegratorSpec& spec,
                               const EvolveOptions& opt) {
    spec.validate();
    if (opt.observer_stride < 1) throw std::domain_error("evolve: observer_stride must be >= 1");
    ObservableSeries out;
    const double t0 = wf.t;
    auto check_edges = [&]() {
        const double pe = op.edge_probability(wf, opt.edge_cells);
        out.max_edge_probability = std::max(out.max_edge_probability, pe);
        if (!(pe > opt.edge_tolerance)) return true;
        if (!out.escape_time) {
            out.escape_time = wf.t;
            std::ostringstream os;
            os << "box escape: probability " << pe << " within " << opt.edge_cells
               << " cells of the boundary at t = " << wf.t;
            out.abort_reason = os.str();
        }
        if (opt.on_escape == EscapePolicy::Record) return true;
        out.aborted = wf.t;
        return false;
    };
    if (!check_edges()) return out;
    out.records.push_back(op.observe(wf));
    const std::size_t n = spec.steps();
    const auto stride = static_cast<std::size_t>(opt.observer_stride);
    for (std::size_t k = 0; k < n;) {
        const std::size_t chunk = std::min(stride, n - k);
        op.advance(wf, spec.dt, spec.scheme, chunk);
        k += chunk;
        wf.t = t0 + static_cast<double>(k) * spec.dt;
        if (k % stride == 0) {
            if (!check_edges()) break;
            out.records.push_back(op.observe(wf));
        }
    }
    return out;
}

inline ObservableSeries evolve(WaveFunction2D& wf, SplitOperator& op, const IntegratorSpec& spec,
                               int observer_stride = 1) {
    EvolveOptions opt;
    opt.observer_stride = observer_stride;
    return evolve(wf, op, spec, opt);
}

inline ObservableSeries evolve(WaveFunction2D& wf, const ModelParams& p, const IntegratorSpec& spec,
                               int observer_stride = 1) {
    SplitOperator op(wf.grid, p);
    return evolve(wf, op, spec, observer_stride);
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Little-endian layout: magic "SQCWF1\0\0" (8 bytes), u32 version = 1,
// u32 n_A, u32 n_x, f64 L_A, f64 L_x, f64 t, f64 e, f64 m, f64 hbar, then
// n_A * n_x interleaved (re, im) f64 pairs, row-major with A slow.

inline constexpr char checkpoint_magic[8] = {'S', 'Q', 'C', 'W', 'F', '1', '\0', '\0'};
inline constexpr std::uint32_t checkpoint_version = 1;
inline constexpr std::size_t checkpoint_header_size = 8 + 3 * 4 + 6 * 8;

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const char* p) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

} // namespace detail

inline std::string checkpoint_bytes(const WaveFunction2D& wf, const ModelParams& p) {
    std::string out;
    out.reserve(checkpoint_header_size + 16 * wf.amplitudes.size());
    out.append(checkpoint_magic, 8);
    detail::put_le<std::uint32_t>(out, checkpoint_version);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(wf.grid.n_A));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(wf.grid.n_x));
    for (double v : {wf.grid.L_A, wf.grid.L_x, wf.t, p.e, p.m, p.hbar}) detail::put_le<double>(out, v);
    for (const auto& a : wf.amplitudes) {
        detail::put_le<double>(out, a.real());
        detail::put_le<double>(out, a.imag());
    }
    return out;
}

inline void checkpoint_save(const WaveFunction2D& wf, const ModelParams& p, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint_save: cannot open " + path);
    const std::string bytes = checkpoint_bytes(wf, p);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("checkpoint_save: write failed for " + path);
}

struct Checkpoint {
    WaveFunction2D wf;
    ModelParams params;
};

inline Checkpoint checkpoint_parse(const std::string& bytes) {
    if (bytes.size() < checkpoint_header_size) throw format_error("checkpoint: truncated header");
    if (std::memcmp(bytes.data(), checkpoint_magic, 8) != 0) throw format_error("checkpoint: bad magic bytes");
    const char* p = bytes.data() + 8;
    const auto version = detail::get_le<std::uint32_t>(p);
    if (version != checkpoint_version)
        throw format_error("checkpoint: unsupported version " + std::to_string(version));
    Checkpoint c;
    c.wf.grid.n_A = detail::get_le<std::uint32_t>(p + 4);
    c.wf.grid.n_x = detail::get_le<std::uint32_t>(p + 8);
    const char* q = p + 12;
    c.wf.grid.L_A = detail::get_le<double>(q);
    c.wf.grid.L_x = detail::get_le<double>(q + 8);
    c.wf.t = detail::get_le<double>(q + 16);
    c.params.e = detail::get_le<double>(q + 24);
    c.params.m = detail::get_le<double>(q + 32);
    c.params.hbar = detail::get_le<double>(q + 40);
    const std::size_t n = c.wf.grid.n_A * c.wf.grid.n_x;
    if (c.wf.grid.n_A == 0 || c.wf.grid.n_x == 0 || n > (std::numeric_limits<std::size_t>::max() - checkpoint_header_size) / 16)
        throw format_error("checkpoint: invalid grid dimensions");
    if (bytes.size() != checkpoint_header_size + 16 * n) {
        std::ostringstream os;
        os << "checkpoint: size mismatch (expected " << checkpoint_header_size + 16 * n << " bytes, found "
           << bytes.size() << ")";
        throw format_error(os.str());
    }
    c.wf.amplitudes.resize(n);
    const char* d = bytes.data() + checkpoint_header_size;
    for (std::size_t k = 0; k < n; ++k)
        c.wf.amplitudes[k] = cplx(detail::get_le<double>(d + 16 * k), detail::get_le<double>(d + 16 * k + 8));
    return c;
}

inline Checkpoint checkpoint_load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint_load: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return checkpoint_parse(ss.str());
}

} // namespace sqchaos
