#pragma once

#include <flownet/types.hpp>

#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace flownet {

/// Strictly increasing piecewise-linear curve y(x). Evaluation outside the
/// tabulated abscissae is an error; there is no extrapolation.
class PiecewiseLinear {
 public:
  PiecewiseLinear() = default;
  explicit PiecewiseLinear(std::vector<std::pair<double, double>> points);

  double value(double x) const;
  /// Right derivative (left derivative at the last knot).
  double slope(double x) const;
  double inverse(double y) const;
  /// Integral of y over [0, x] by adaptive Simpson, tolerance 1e-10.
  double integral(double x) const;
  /// Integral of the inverse x(y) over [0, y].
  double inverse_integral(double y) const;

  bool strictly_increasing() const;
  bool passes_through_origin() const;
  double x_min() const { return points_.front().first; }
  double x_max() const { return points_.back().first; }
  double y_min() const { return points_.front().second; }
  double y_max() const { return points_.back().second; }
  const std::vector<std::pair<double, double>>& points() const { return points_; }

  friend bool operator==(const PiecewiseLinear&, const PiecewiseLinear&) = default;

 private:
  std::size_t segment_of_x(double x) const;
  std::size_t segment_of_y(double y) const;

  std::vector<std::pair<double, double>> points_;
};

/// Kinds of branch-level constitutive relation. Inductive relations are
/// recognised so documents can name them, and always rejected.
enum class LawKind { resistive, capacitive, inductive };

void require_supported(LawKind kind);

struct LinearResistance {
  double conductance;
  friend bool operator==(const LinearResistance&, const LinearResistance&) = default;
};
struct ReluResistance {
  double conductance;
  friend bool operator==(const ReluResistance&, const ReluResistance&) = default;
};
/// F = K tanh(scale * W).
struct TanhResistance {
  double conductance;
  double scale;
  friend bool operator==(const TanhResistance&, const TanhResistance&) = default;
};
struct TabulatedResistance {
  PiecewiseLinear curve;
  friend bool operator==(const TabulatedResistance&, const TabulatedResistance&) = default;
};

/// Resistive law F = Lambda(W) applied to one branch.
class ResistiveLaw {
 public:
  using Form = std::variant<LinearResistance, ReluResistance, TanhResistance, TabulatedResistance>;

  explicit ResistiveLaw(Form form) : form_(std::move(form)) {}

  static ResistiveLaw linear(double conductance) { return ResistiveLaw(LinearResistance{conductance}); }
  static ResistiveLaw relu(double conductance) { return ResistiveLaw(ReluResistance{conductance}); }
  static ResistiveLaw tanh(double conductance, double scale) {
    return ResistiveLaw(TanhResistance{conductance, scale});
  }
  static ResistiveLaw tabulated(std::vector<std::pair<double, double>> points) {
    return ResistiveLaw(TabulatedResistance{PiecewiseLinear(std::move(points))});
  }

  double flow(double W) const;
  /// dF/dW; the relu kink takes the right derivative.
  double slope(double W) const;
  /// W(F); throws DomainError where the law is not invertible.
  double potential_difference(double F) const;
  /// Integral of F dW over [0, W].
  double cocontent(double W) const;
  /// Integral of W dF over [0, F].
  double content(double F) const;

  /// Throws ValidationError when parameters violate the law's invariants.
  void validate() const;
  bool is_linear() const { return std::holds_alternative<LinearResistance>(form_); }
  /// Strictly increasing over its whole domain.
  bool strictly_monotone() const;
  std::string_view form_name() const;
  const Form& form() const { return form_; }

  friend bool operator==(const ResistiveLaw&, const ResistiveLaw&) = default;

 private:
  Form form_;
};

struct LinearCapacity {
  double capacitance;
  friend bool operator==(const LinearCapacity&, const LinearCapacity&) = default;
};
/// Curve w -> Z.
struct TabulatedCapacity {
  PiecewiseLinear curve;
  friend bool operator==(const TabulatedCapacity&, const TabulatedCapacity&) = default;
};

/// Capacitive law Z = C(w) of a dynamic node.
class CapacitiveLaw {
 public:
  using Form = std::variant<LinearCapacity, TabulatedCapacity>;

  explicit CapacitiveLaw(Form form) : form_(std::move(form)) {}

  static CapacitiveLaw linear(double capacitance) { return CapacitiveLaw(LinearCapacity{capacitance}); }
  static CapacitiveLaw tabulated(std::vector<std::pair<double, double>> points) {
    return CapacitiveLaw(TabulatedCapacity{PiecewiseLinear(std::move(points))});
  }

  double inventory(double w) const;
  double potential(double Z) const;
  /// dZ/dw.
  double slope(double w) const;

  void validate() const;
  bool is_linear() const { return std::holds_alternative<LinearCapacity>(form_); }
  /// Capacitance of a linear law; throws ValidationError otherwise.
  double capacitance() const;
  std::string_view form_name() const;
  const Form& form() const { return form_; }

  friend bool operator==(const CapacitiveLaw&, const CapacitiveLaw&) = default;

 private:
  Form form_;
};

}  // namespace flownet
