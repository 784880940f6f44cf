#include "evdesnow/desnow.hpp"

#include "evdesnow/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace evdesnow::desnow {

namespace {

constexpr double kMinPairDistance = 2.0;
constexpr std::size_t kPartnerAttempts = 16;

struct Line {
    double x = 0, y = 0, t = 0; // anchor, t in seconds
    Velocity v;
};

class StreakSearch {
public:
    StreakSearch(const EventStream& stream, const VelocityPrior& prior, const DetectorOptions& opts)
        : stream_(stream), prior_(prior), opts_(opts), rng_(opts.seed) {
        const auto& ev = stream.events;
        order_.resize(ev.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::stable_sort(order_.begin(), order_.end(),
                         [&](std::size_t a, std::size_t b) { return ev[a].t < ev[b].t; });
        origin_ = ev.empty() ? 0 : ev[order_.front()].t;
        t_.resize(ev.size());
        for (std::size_t i = 0; i < ev.size(); ++i)
            t_[i] = static_cast<double>(ev[i].t - origin_) * 1e-6;
        alive_.assign(ev.size(), 1);
    }

    std::vector<Streak> run(std::size_t min_support) {
        std::vector<Streak> streaks;
        for (;;) {
            refresh_remaining();
            if (remaining_.size() < min_support) break;
            std::vector<std::size_t> best;
            Line best_line;
            for (std::size_t h = 0; h < opts_.hypotheses; ++h) {
                Line line;
                if (!sample_hypothesis(line)) continue;
                auto inliers = refine(line);
                if (inliers.size() > best.size()) {
                    best = std::move(inliers);
                    best_line = line;
                }
            }
            if (best.size() < min_support) break;
            streaks.push_back(make_streak(best_line, std::move(best)));
            for (std::size_t i : streaks.back().support) alive_[i] = 0;
        }
        return streaks;
    }

private:
    std::size_t draw(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

    double ex(std::size_t i) const { return stream_.events[i].x; }
    double ey(std::size_t i) const { return stream_.events[i].y; }

    void refresh_remaining() {
        remaining_.clear();
        remaining_t_.clear();
        for (std::size_t i : order_) {
            if (!alive_[i]) continue;
            remaining_.push_back(i);
            remaining_t_.push_back(t_[i]);
        }
    }

    std::pair<std::size_t, std::size_t> time_range(double lo, double hi) const {
        auto first = std::lower_bound(remaining_t_.begin(), remaining_t_.end(), lo);
        auto last = std::upper_bound(first, remaining_t_.end(), hi);
        return {static_cast<std::size_t>(first - remaining_t_.begin()),
                static_cast<std::size_t>(last - remaining_t_.begin())};
    }

    bool sample_hypothesis(Line& line) {
        const std::size_t a = remaining_[draw(remaining_.size())];
        const double reach = opts_.max_pair_distance + 2.0 * prior_.tolerance;
        const double dt_max = prior_.v_min > 0.0 ? reach / prior_.v_min
                                                 : std::numeric_limits<double>::infinity();
        const auto [lo, hi] = time_range(t_[a] - dt_max, t_[a] + dt_max);
        if (hi - lo < 2) return false;
        for (std::size_t attempt = 0; attempt < kPartnerAttempts; ++attempt) {
            const std::size_t b = remaining_[lo + draw(hi - lo)];
            const double dt = t_[b] - t_[a];
            if (std::abs(dt) < 1e-6) continue;
            const double dx = ex(b) - ex(a);
            const double dy = ey(b) - ey(a);
            const double dist = std::hypot(dx, dy);
            if (dist < kMinPairDistance || dist > opts_.max_pair_distance) continue;
            const Velocity v{dx / dt, dy / dt};
            if (!prior_.admits(v)) continue;
            line = Line{ex(a), ey(a), t_[a], v};
            return true;
        }
        return false;
    }

    // Time interval over which the line stays within tolerance of the sensor.
    std::pair<double, double> visible_interval(const Line& line) const {
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        const double tol = prior_.tolerance;
        auto clip = [&](double p0, double v, double extent) {
            const double min_p = -tol - 0.5;
            const double max_p = extent - 0.5 + tol;
            if (v == 0.0) {
                if (p0 < min_p || p0 > max_p) hi = lo - 1.0;
                return;
            }
            double a = line.t + (min_p - p0) / v;
            double b = line.t + (max_p - p0) / v;
            if (a > b) std::swap(a, b);
            lo = std::max(lo, a);
            hi = std::min(hi, b);
        };
        clip(line.x, line.v.vx, stream_.geometry.width);
        clip(line.y, line.v.vy, stream_.geometry.height);
        return {lo, hi};
    }

    std::vector<std::size_t> collect(const Line& line) const {
        std::vector<std::size_t> inliers;
        const auto [t_lo, t_hi] = visible_interval(line);
        if (t_lo > t_hi) return inliers;
        const auto [first, last] = time_range(t_lo, t_hi);
        const double tol2 = prior_.tolerance * prior_.tolerance;
        for (std::size_t k = first; k < last; ++k) {
            const std::size_t i = remaining_[k];
            const double dt = t_[i] - line.t;
            const double dx = ex(i) - (line.x + line.v.vx * dt);
            const double dy = ey(i) - (line.y + line.v.vy * dt);
            if (dx * dx + dy * dy <= tol2) inliers.push_back(i);
        }
        return inliers;
    }

    static bool fit(const std::vector<std::size_t>& idx, const std::vector<double>& t,
                    const EventStream& s, Line& out) {
        const double n = static_cast<double>(idx.size());
        double tm = 0, xm = 0, ym = 0;
        for (std::size_t i : idx) {
            tm += t[i];
            xm += s.events[i].x;
            ym += s.events[i].y;
        }
        tm /= n;
        xm /= n;
        ym /= n;
        double stt = 0, stx = 0, sty = 0;
        for (std::size_t i : idx) {
            const double dt = t[i] - tm;
            stt += dt * dt;
            stx += dt * (s.events[i].x - xm);
            sty += dt * (s.events[i].y - ym);
        }
        if (stt <= 1e-14) return false;
        out = Line{xm, ym, tm, Velocity{stx / stt, sty / stt}};
        return true;
    }

    // Alternates least-squares refits with inlier re-collection. On return
    // `line` is the line the returned inliers were collected against.
    std::vector<std::size_t> refine(Line& line) const {
        auto inliers = collect(line);
        for (std::size_t r = 0; r < opts_.refinements; ++r) {
            if (inliers.size() < 2) break;
            Line refit;
            if (!fit(inliers, t_, stream_, refit)) break;
            if (!prior_.admits(refit.v)) break;
            auto next = collect(refit);
            if (next.size() < inliers.size()) break;
            line = refit;
            const bool stable = next == inliers;
            inliers = std::move(next);
            if (stable) break;
        }
        return inliers;
    }

    Streak make_streak(const Line& line, std::vector<std::size_t> support) const {
        std::sort(support.begin(), support.end());
        Streak s;
        s.velocity = line.v;
        s.tolerance = prior_.tolerance;
        const double anchor_us = std::max(0.0, std::round(line.t * 1e6));
        s.t0 = origin_ + static_cast<Timestamp>(anchor_us);
        const double shift = anchor_us * 1e-6 - line.t;
        s.x0 = line.x + line.v.vx * shift;
        s.y0 = line.y + line.v.vy * shift;
        s.t_start = std::numeric_limits<Timestamp>::max();
        s.t_end = 0;
        std::vector<double> dist;
        dist.reserve(support.size());
        for (std::size_t i : support) {
            const Event& e = stream_.events[i];
            s.t_start = std::min(s.t_start, e.t);
            s.t_end = std::max(s.t_end, e.t);
            const double dt = t_[i] - line.t;
            dist.push_back(std::hypot(e.x - (line.x + line.v.vx * dt), e.y - (line.y + line.v.vy * dt)));
        }
        auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
        std::nth_element(dist.begin(), mid, dist.end());
        s.radius = *mid;
        s.support = std::move(support);
        return s;
    }

    const EventStream& stream_;
    const VelocityPrior& prior_;
    const DetectorOptions& opts_;
    std::mt19937_64 rng_;
    Timestamp origin_ = 0;
    std::vector<std::size_t> order_;
    std::vector<double> t_;
    std::vector<char> alive_;
    std::vector<std::size_t> remaining_;
    std::vector<double> remaining_t_;
};

} // namespace

double Velocity::speed() const noexcept { return std::hypot(vx, vy); }

double Streak::x_at(double t_us) const noexcept {
    return x0 + velocity.vx * (t_us - static_cast<double>(t0)) * 1e-6;
}

double Streak::y_at(double t_us) const noexcept {
    return y0 + velocity.vy * (t_us - static_cast<double>(t0)) * 1e-6;
}

void VelocityPrior::validate() const {
    if (!(v_min >= 0.0) || !(v_min < v_max))
        throw Error(ErrorCode::InvalidArgument, "velocity prior needs 0 <= v_min < v_max");
    if (!(half_angle > 0.0) || half_angle > std::numbers::pi)
        throw Error(ErrorCode::InvalidArgument, "cone half-angle must lie in (0, pi]");
    if (!(tolerance > 0.0))
        throw Error(ErrorCode::InvalidArgument, "spatial tolerance must be positive");
    if (half_angle < std::numbers::pi && std::hypot(direction_x, direction_y) == 0.0)
        throw Error(ErrorCode::InvalidArgument, "cone direction must be non-zero");
}

bool VelocityPrior::admits(Velocity v) const noexcept {
    const double speed = v.speed();
    if (!(speed >= v_min && speed <= v_max)) return false;
    if (half_angle >= std::numbers::pi || speed == 0.0) return true;
    const double norm = std::hypot(direction_x, direction_y);
    const double cosine = (v.vx * direction_x + v.vy * direction_y) / (speed * norm);
    return std::acos(std::clamp(cosine, -1.0, 1.0)) <= half_angle;
}

std::vector<Streak> detect_streaks(const EventStream& stream, const VelocityPrior& prior,
                                   std::size_t min_support, const DetectorOptions& options) {
    prior.validate();
    if (min_support < 2) throw Error(ErrorCode::InvalidArgument, "min_support must be >= 2");
    if (stream.events.size() < min_support) return {};
    return StreakSearch(stream, prior, options).run(min_support);
}

} // namespace evdesnow::desnow
