#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mrac/errors.hpp"

namespace mrac {

/// Reference signal families for the tracking scenarios.
///  - filtered_square: square wave through a first-order lag
///  - washout_square:  square wave through a first-order washout (high-pass);
///                     pulses of height up to 2 x amplitude that revert to zero
///  - distorted_square: filtered_square plus a sinusoidal distortion
///  - constant / table: self-explanatory
/// Square kinds are realized on the sampling grid (bilinear filter update).
/// The distortion fields also apply additively to washout_square.
enum class ReferenceKind { constant, filtered_square, washout_square, distorted_square, table };

struct ReferenceSpec {
    ReferenceKind kind = ReferenceKind::filtered_square;
    double amplitude = 30.0;            ///< square amplitude [m/s^2]
    double period = 12.0;               ///< square period [s]
    double filter_time_constant = 0.2;  ///< lag / washout time constant [s]; 0 = unfiltered
    double phase_offset = 0.0;          ///< shifts the square transitions [s]
    double distortion_fraction = 0.0;   ///< additive sine amplitude as a fraction of `amplitude`
    double distortion_hz = 0.25;
    std::vector<std::pair<double, double>> table;  ///< (t, value), strictly increasing t

    void validate() const {
        if (!(amplitude >= 0.0)) throw ConfigError("reference.amplitude must be >= 0");
        if (!(period > 0.0)) throw ConfigError("reference.period must be positive");
        if (!(filter_time_constant >= 0.0))
            throw ConfigError("reference.filter_tau must be >= 0");
        if (!(distortion_fraction >= 0.0))
            throw ConfigError("reference.distortion_fraction must be >= 0");
        if (distortion_fraction > 0.0 && !(distortion_hz > 0.0))
            throw ConfigError("reference.distortion_hz must be positive");
        if (kind == ReferenceKind::table) {
            if (table.empty()) throw ConfigError("reference.table is empty");
            for (size_t i = 1; i < table.size(); ++i)
                if (!(table[i].first > table[i - 1].first))
                    throw ConfigError("reference.table times must be strictly increasing");
        }
    }
};

/// Stateful sampler. Square kinds advance an internal bilinear filter on the
/// dt grid, so they must be sampled forward in time and on grid points
/// (re-sampling the current instant is fine). Constant and table kinds are
/// stateless.
class ReferenceSignal {
  public:
    ReferenceSignal(ReferenceSpec spec, double dt) : spec_(std::move(spec)), dt_(dt) {
        spec_.validate();
        if (!(dt > 0.0)) throw ConfigError("reference sampling step must be positive");
    }

    const ReferenceSpec& spec() const { return spec_; }

    double sample(double t) {
        if (!(t >= 0.0)) throw OrderingError("reference sampled at negative time");
        switch (spec_.kind) {
            case ReferenceKind::constant:
                return spec_.amplitude;
            case ReferenceKind::table:
                return table_value(t);
            default:
                return square_value(t);
        }
    }

  private:
    double raw_square(double t) const {
        double phase = std::fmod(t - spec_.phase_offset, spec_.period);
        if (phase < 0.0) phase += spec_.period;
        return (phase < 0.5 * spec_.period) ? spec_.amplitude : -spec_.amplitude;
    }

    // Advance the lag state to grid step k; bilinear (Tustin) realization of
    // tau y' + y = s, starting from rest.
    void advance_to(long k) {
        const double a = dt_ / (2.0 * spec_.filter_time_constant);
        while (k_last_ < k) {
            const double s0 = raw_square(static_cast<double>(k_last_) * dt_);
            const double s1 = raw_square(static_cast<double>(k_last_ + 1) * dt_);
            lag_ = ((1.0 - a) * lag_ + a * (s0 + s1)) / (1.0 + a);
            ++k_last_;
        }
    }

    double square_value(double t) {
        const long k = static_cast<long>(std::llround(t / dt_));
        if (std::abs(t - static_cast<double>(k) * dt_) > 1e-9 * std::max(1.0, std::abs(t)))
            throw OrderingError("stateful reference must be sampled on the dt grid");
        if (k < k_last_) throw OrderingError("stateful reference sampled backwards in time");

        double base;
        if (spec_.filter_time_constant == 0.0) {
            k_last_ = k;
            base = raw_square(t);
            if (spec_.kind == ReferenceKind::washout_square) base = 0.0;  // ideal washout of a settled level
        } else {
            advance_to(k);
            base = (spec_.kind == ReferenceKind::washout_square) ? raw_square(t) - lag_ : lag_;
        }

        const bool distorted = spec_.kind == ReferenceKind::distorted_square ||
                               spec_.kind == ReferenceKind::washout_square;
        if (distorted && spec_.distortion_fraction > 0.0)
            base += spec_.distortion_fraction * spec_.amplitude *
                    std::sin(2.0 * M_PI * spec_.distortion_hz * t);
        return base;
    }

    double table_value(double t) const {
        const auto& tab = spec_.table;
        if (t <= tab.front().first) return tab.front().second;
        if (t >= tab.back().first) return tab.back().second;
        auto hi = std::upper_bound(tab.begin(), tab.end(), t,
                                   [](double v, const auto& p) { return v < p.first; });
        auto lo = hi - 1;
        const double w = (t - lo->first) / (hi->first - lo->first);
        return lo->second + w * (hi->second - lo->second);
    }

    ReferenceSpec spec_;
    double dt_;
    double lag_ = 0.0;
    long k_last_ = 0;
};

}  // namespace mrac
