#include <flownet/constitutive.hpp>
#include <flownet/quadrature.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace flownet {

namespace {

constexpr double kSimpsonTol = 1e-10;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string out_of_range(std::string_view what, double value, double lo, double hi) {
  std::ostringstream os;
  os << what << " " << value << " outside tabulated range [" << lo << ", " << hi << "]";
  return os.str();
}

// log(cosh(x)) without overflow for large |x|.
double log_cosh(double x) {
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// PiecewiseLinear

PiecewiseLinear::PiecewiseLinear(std::vector<std::pair<double, double>> points)
    : points_(std::move(points)) {}

bool PiecewiseLinear::strictly_increasing() const {
  if (points_.size() < 2) return false;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i].first > points_[i - 1].first) || !(points_[i].second > points_[i - 1].second))
      return false;
  }
  return true;
}

bool PiecewiseLinear::passes_through_origin() const {
  return std::any_of(points_.begin(), points_.end(),
                     [](const auto& p) { return p.first == 0.0 && p.second == 0.0; });
}

std::size_t PiecewiseLinear::segment_of_x(double x) const {
  if (points_.size() < 2 || x < x_min() || x > x_max())
    throw DomainError(out_of_range("argument", x, points_.empty() ? 0.0 : x_min(),
                                   points_.empty() ? 0.0 : x_max()));
  auto it = std::upper_bound(points_.begin(), points_.end(), x,
                             [](double v, const auto& p) { return v < p.first; });
  std::size_t i = static_cast<std::size_t>(it - points_.begin());
  return std::min(i == 0 ? 0 : i - 1, points_.size() - 2);
}

std::size_t PiecewiseLinear::segment_of_y(double y) const {
  if (points_.size() < 2 || y < y_min() || y > y_max())
    throw DomainError(out_of_range("value", y, points_.empty() ? 0.0 : y_min(),
                                   points_.empty() ? 0.0 : y_max()));
  auto it = std::upper_bound(points_.begin(), points_.end(), y,
                             [](double v, const auto& p) { return v < p.second; });
  std::size_t i = static_cast<std::size_t>(it - points_.begin());
  return std::min(i == 0 ? 0 : i - 1, points_.size() - 2);
}

double PiecewiseLinear::value(double x) const {
  const std::size_t i = segment_of_x(x);
  const auto [x0, y0] = points_[i];
  const auto [x1, y1] = points_[i + 1];
  return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
}

double PiecewiseLinear::slope(double x) const {
  const std::size_t i = segment_of_x(x);
  const auto [x0, y0] = points_[i];
  const auto [x1, y1] = points_[i + 1];
  return (y1 - y0) / (x1 - x0);
}

double PiecewiseLinear::inverse(double y) const {
  const std::size_t i = segment_of_y(y);
  const auto [x0, y0] = points_[i];
  const auto [x1, y1] = points_[i + 1];
  return x0 + (x1 - x0) * (y - y0) / (y1 - y0);
}

double PiecewiseLinear::integral(double x) const {
  segment_of_x(x);
  segment_of_x(0.0);
  const auto f = [this](double s) { return value(s); };
  // Integrate knot to knot so each Simpson panel sees a single linear piece.
  const double lo = std::min(0.0, x);
  const double hi = std::max(0.0, x);
  double sum = 0.0;
  double a = lo;
  for (const auto& [knot, _] : points_) {
    if (knot <= a) continue;
    if (knot >= hi) break;
    sum += adaptive_simpson(f, a, knot, kSimpsonTol);
    a = knot;
  }
  sum += adaptive_simpson(f, a, hi, kSimpsonTol);
  return x >= 0.0 ? sum : -sum;
}

double PiecewiseLinear::inverse_integral(double y) const {
  segment_of_y(y);
  segment_of_y(0.0);
  const auto f = [this](double s) { return inverse(s); };
  const double lo = std::min(0.0, y);
  const double hi = std::max(0.0, y);
  double sum = 0.0;
  double a = lo;
  for (const auto& [_, knot] : points_) {
    if (knot <= a) continue;
    if (knot >= hi) break;
    sum += adaptive_simpson(f, a, knot, kSimpsonTol);
    a = knot;
  }
  sum += adaptive_simpson(f, a, hi, kSimpsonTol);
  return y >= 0.0 ? sum : -sum;
}

void require_supported(LawKind kind) {
  if (kind == LawKind::inductive)
    throw ValidationError("inductive constitutive laws are not supported");
}

// ---------------------------------------------------------------------------
// ResistiveLaw

double ResistiveLaw::flow(double W) const {
  return std::visit(overloaded{
                        [W](const LinearResistance& l) { return l.conductance * W; },
                        [W](const ReluResistance& l) { return W > 0.0 ? l.conductance * W : 0.0; },
                        [W](const TanhResistance& l) { return l.conductance * std::tanh(l.scale * W); },
                        [W](const TabulatedResistance& l) { return l.curve.value(W); },
                    },
                    form_);
}

double ResistiveLaw::slope(double W) const {
  return std::visit(overloaded{
                        [](const LinearResistance& l) { return l.conductance; },
                        [W](const ReluResistance& l) { return W >= 0.0 ? l.conductance : 0.0; },
                        [W](const TanhResistance& l) {
                          const double c = std::cosh(l.scale * W);
                          return l.conductance * l.scale / (c * c);
                        },
                        [W](const TabulatedResistance& l) { return l.curve.slope(W); },
                    },
                    form_);
}

double ResistiveLaw::potential_difference(double F) const {
  return std::visit(
      overloaded{
          [F](const LinearResistance& l) { return F / l.conductance; },
          [F](const ReluResistance& l) {
            if (F < 0.0) throw DomainError("relu law is not invertible at negative flow");
            return F / l.conductance;
          },
          [F](const TanhResistance& l) {
            if (std::abs(F) >= l.conductance)
              throw DomainError("flow outside the open range of the tanh law");
            return std::atanh(F / l.conductance) / l.scale;
          },
          [F](const TabulatedResistance& l) { return l.curve.inverse(F); },
      },
      form_);
}

double ResistiveLaw::cocontent(double W) const {
  return std::visit(overloaded{
                        [W](const LinearResistance& l) { return 0.5 * l.conductance * W * W; },
                        [W](const ReluResistance& l) { return W > 0.0 ? 0.5 * l.conductance * W * W : 0.0; },
                        [W](const TanhResistance& l) { return l.conductance / l.scale * log_cosh(l.scale * W); },
                        [W](const TabulatedResistance& l) { return l.curve.integral(W); },
                    },
                    form_);
}

double ResistiveLaw::content(double F) const {
  return std::visit(
      overloaded{
          [F](const LinearResistance& l) { return F * F / (2.0 * l.conductance); },
          [F](const ReluResistance& l) {
            if (F < 0.0) throw DomainError("relu law is not invertible at negative flow");
            return F * F / (2.0 * l.conductance);
          },
          [F](const TanhResistance& l) {
            const double r = F / l.conductance;
            if (std::abs(r) >= 1.0) throw DomainError("flow outside the open range of the tanh law");
            return (F * std::atanh(r) + 0.5 * l.conductance * std::log1p(-r * r)) / l.scale;
          },
          [F](const TabulatedResistance& l) { return l.curve.inverse_integral(F); },
      },
      form_);
}

void ResistiveLaw::validate() const {
  std::visit(overloaded{
                 [](const LinearResistance& l) {
                   if (!(l.conductance > 0.0) || !std::isfinite(l.conductance))
                     throw ValidationError("linear law requires conductance K > 0");
                 },
                 [](const ReluResistance& l) {
                   if (!(l.conductance > 0.0) || !std::isfinite(l.conductance))
                     throw ValidationError("relu law requires conductance K > 0");
                 },
                 [](const TanhResistance& l) {
                   if (!(l.conductance > 0.0) || !(l.scale > 0.0))
                     throw ValidationError("tanh law requires K > 0 and scale > 0");
                 },
                 [](const TabulatedResistance& l) {
                   if (!l.curve.strictly_increasing())
                     throw ValidationError("tabulated resistive law must be strictly increasing");
                   if (!l.curve.passes_through_origin())
                     throw ValidationError("tabulated resistive law must pass through (0, 0)");
                 },
             },
             form_);
}

bool ResistiveLaw::strictly_monotone() const {
  return !std::holds_alternative<ReluResistance>(form_);
}

std::string_view ResistiveLaw::form_name() const {
  return std::visit(overloaded{
                        [](const LinearResistance&) { return std::string_view("linear"); },
                        [](const ReluResistance&) { return std::string_view("relu"); },
                        [](const TanhResistance&) { return std::string_view("tanh"); },
                        [](const TabulatedResistance&) { return std::string_view("tabulated"); },
                    },
                    form_);
}

// ---------------------------------------------------------------------------
// CapacitiveLaw

double CapacitiveLaw::inventory(double w) const {
  return std::visit(overloaded{
                        [w](const LinearCapacity& c) { return c.capacitance * w; },
                        [w](const TabulatedCapacity& c) { return c.curve.value(w); },
                    },
                    form_);
}

double CapacitiveLaw::potential(double Z) const {
  return std::visit(overloaded{
                        [Z](const LinearCapacity& c) { return Z / c.capacitance; },
                        [Z](const TabulatedCapacity& c) { return c.curve.inverse(Z); },
                    },
                    form_);
}

double CapacitiveLaw::slope(double w) const {
  return std::visit(overloaded{
                        [](const LinearCapacity& c) { return c.capacitance; },
                        [w](const TabulatedCapacity& c) { return c.curve.slope(w); },
                    },
                    form_);
}

void CapacitiveLaw::validate() const {
  std::visit(overloaded{
                 [](const LinearCapacity& c) {
                   if (!(c.capacitance > 0.0) || !std::isfinite(c.capacitance))
                     throw ValidationError("linear capacitive law requires C > 0");
                 },
                 [](const TabulatedCapacity& c) {
                   if (!c.curve.strictly_increasing())
                     throw ValidationError("tabulated capacitive law must be strictly increasing");
                 },
             },
             form_);
}

double CapacitiveLaw::capacitance() const {
  if (const auto* c = std::get_if<LinearCapacity>(&form_)) return c->capacitance;
  throw ValidationError("capacitance is only defined for linear capacitive laws");
}

std::string_view CapacitiveLaw::form_name() const {
  return is_linear() ? std::string_view("linear") : std::string_view("tabulated");
}

}  // namespace flownet
