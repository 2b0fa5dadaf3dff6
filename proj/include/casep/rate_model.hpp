#pragma once

// Jump-rate models b(direction, source occupancy, target occupancy) for
// nearest-neighbor misanthrope processes. Rates are thinning probabilities
// against rate-1 clocks, so every entry lies in [0, 1].

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "casep/errors.hpp"

namespace casep {

enum class ModelKind { asep, ssep, asep_qj, custom };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::asep: return "asep";
    case ModelKind::ssep: return "ssep";
    case ModelKind::asep_qj: return "asep_qj";
    case ModelKind::custom: return "custom";
  }
  return "?";
}

// Which direction receives the larger ASEP rate 1/2 + sqrt(eps)/2.
enum class Drift { right, left };

class RateModel {
 public:
  using RateFn = std::function<double(int dir, int source, int target)>;

  RateModel(ModelKind kind, int J, const RateFn& fn) : kind_(kind), J_(J) {
    if (J < 1) throw OutOfRange("J must be >= 1");
    const int n = J + 1;
    table_.assign(2 * n * n, 0.0);
    for (int d : {-1, 1})
      for (int a = 0; a <= J; ++a)
        for (int b = 0; b <= J; ++b) table_[slot(d, a, b)] = fn(d, a, b);
    validate();
  }

  ModelKind kind() const { return kind_; }
  int spin_max() const { return J_; }

  double rate(int dir, int source, int target) const { return table_[slot(dir, source, target)]; }

  // Dense table indexed by slot(); exposed for the event loop.
  const double* table() const { return table_.data(); }
  std::size_t slot(int dir, int source, int target) const {
    const int n = J_ + 1;
    return static_cast<std::size_t>(((dir > 0 ? 1 : 0) * n + source) * n + target);
  }

  double max_rate() const {
    double m = 0;
    for (double r : table_) m = std::max(m, r);
    return m;
  }

  // Model parameters (0 when not applicable).
  double epsilon = 0.0;
  double q = 0.0;
  // Factor the rates were divided by; physical time = engine time / time_scale.
  double time_scale = 1.0;
  Drift drift = Drift::right;

 private:
  // Suppression, range and the misanthrope monotonicity, by exhaustive scan.
  void validate() const {
    for (int d : {-1, 1}) {
      for (int a = 0; a <= J_; ++a) {
        for (int b = 0; b <= J_; ++b) {
          const double r = rate(d, a, b);
          if (!(r >= 0.0)) throw OutOfRange("negative or NaN rate");
          if (r > 1.0)
            throw RateOverflow("rate b(" + std::to_string(d) + "," + std::to_string(a) + "," +
                               std::to_string(b) + ") = " + std::to_string(r) + " exceeds 1");
          if ((a == 0 || b == J_) && r != 0.0)
            throw NotMisanthrope("jump from an empty site or onto a full site has nonzero rate");
          if (a > 0 && r < rate(d, a - 1, b))
            throw NotMisanthrope("rate decreases in the source occupancy");
          if (b > 0 && r > rate(d, a, b - 1))
            throw NotMisanthrope("rate increases in the target occupancy");
        }
      }
    }
  }

  ModelKind kind_;
  int J_;
  std::vector<double> table_;
};

// ASEP with right rate 1/2 + sqrt(eps)/2 and left rate 1/2 - sqrt(eps)/2
// (reversed when drift == left).
inline RateModel asep_model(double eps, Drift drift = Drift::right) {
  if (!(eps > 0.0 && eps <= 1.0)) throw OutOfRange("ASEP requires 0 < eps <= 1");
  const double fast = 0.5 + 0.5 * std::sqrt(eps);
  const double slow = 0.5 - 0.5 * std::sqrt(eps);
  const double right = drift == Drift::right ? fast : slow;
  const double left = drift == Drift::right ? slow : fast;
  RateModel m(ModelKind::asep, 1, [&](int d, int a, int b) {
    if (a == 0 || b == 1) return 0.0;
    return d > 0 ? right : left;
  });
  m.epsilon = eps;
  m.drift = drift;
  return m;
}

inline RateModel ssep_model() {
  RateModel m(ModelKind::ssep, 1, [](int, int a, int b) { return (a == 1 && b == 0) ? 0.5 : 0.0; });
  return m;
}

// [a]_q = (q^a - q^{-a}) / (q - q^{-1}).
inline double q_bracket(int a, double q) {
  if (!(q > 0.0 && q < 1.0)) throw OutOfRange("q-bracket requires q in (0,1)");
  if (a < 0) throw OutOfRange("q-bracket requires a >= 0");
  return (std::pow(q, a) - std::pow(q, -a)) / (q - 1.0 / q);
}

// Raw ASEP(q,J) rate in (direction, source, target) form:
//   b(+1,s,t) = q^{s-t-(J+1)} [s]_q [J-t]_q / (2[J]_q)
//   b(-1,s,t) = q^{t-s-(J+1)} [J-t]_q [s]_q / (2[J]_q)
// For left jumps the printed form is indexed (left site, right site), i.e.
// (target, source); it is rewritten here in source/target order.
inline double asep_qj_rate(int dir, int source, int target, double q, int J) {
  if (J < 1) throw OutOfRange("J must be >= 1");
  const double norm = 1.0 / (2.0 * q_bracket(J, q));
  const int expo = dir > 0 ? source - target - (J + 1) : target - source - (J + 1);
  return norm * std::pow(q, expo) * q_bracket(source, q) * q_bracket(J - target, q);
}

inline RateModel asep_qj_model(double q, int J) {
  if (!(q > 0.0 && q < 1.0)) throw OutOfRange("ASEP(q,J) requires q in (0,1)");
  RateModel m(ModelKind::asep_qj, J,
              [&](int d, int a, int b) { return asep_qj_rate(d, a, b, q, J); });
  m.q = q;
  return m;
}

// ASEP(q,J) with every rate divided by the largest one. This is a constant
// time change: engine time t corresponds to physical time t / time_scale.
inline RateModel asep_qj_model_normalized(double q, int J) {
  if (!(q > 0.0 && q < 1.0)) throw OutOfRange("ASEP(q,J) requires q in (0,1)");
  double top = 0.0;
  for (int d : {-1, 1})
    for (int a = 0; a <= J; ++a)
      for (int b = 0; b <= J; ++b) top = std::max(top, asep_qj_rate(d, a, b, q, J));
  const double scale = std::max(top, 1.0);
  RateModel m(ModelKind::asep_qj, J,
              [&](int d, int a, int b) { return asep_qj_rate(d, a, b, q, J) / scale; });
  m.q = q;
  m.time_scale = scale;
  return m;
}

inline RateModel custom_model(int J, const RateModel::RateFn& fn) {
  return RateModel(ModelKind::custom, J, fn);
}

}  // namespace casep
