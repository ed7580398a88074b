#pragma once

// Scalar reverse-mode automatic differentiation.
//
// A Tape records every operation applied to its variables as a node holding
// the result value and the local partial derivative towards each parent.
// Nodes are appended in evaluation order, so parents always precede children
// and a single backward pass over the tape yields all adjoints.

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace consensus::ad {

class Tape;

class Var {
 public:
  Var() = default;

  double value() const;
  std::uint32_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

struct Edge {
  std::uint32_t parent;
  double partial;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void reserve(std::size_t nodes, std::size_t edges);

  /// New independent variable. Leaves are numbered in creation order.
  Var input(double value);
  /// Node with no parents; its adjoint is never propagated.
  Var constant(double value);

  /// Appends a node; used by the operator overloads.
  Var push(double value, std::initializer_list<Edge> edges);
  Var push(double value, std::span<const Edge> edges);

  double value(std::uint32_t id) const { return values_[id]; }
  std::size_t size() const { return values_.size(); }
  std::size_t n_inputs() const { return inputs_.size(); }

  /// d(output)/d(input_i) for every leaf, by one reverse sweep. Leaves that
  /// do not influence `output` get 0.
  Eigen::VectorXd gradient(Var output) const;

  /// Throws std::logic_error unless `v` lives on this tape.
  void check(const Var& v) const {
    if (v.tape_ != this) throw std::logic_error("variable belongs to a different tape");
  }

 private:
  std::vector<double> values_;
  std::vector<std::uint32_t> edge_begin_{0};
  std::vector<Edge> edges_;
  std::vector<std::uint32_t> inputs_;
};

inline double Var::value() const { return tape_->value(id_); }

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

Var operator+(const Var& a, double b);
Var operator+(double a, const Var& b);
Var operator-(const Var& a, double b);
Var operator-(double a, const Var& b);
Var operator*(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, double b);
Var operator/(double a, const Var& b);

Var& operator+=(Var& a, const Var& b);
Var& operator-=(Var& a, const Var& b);

Var exp(const Var& x);
/// Throws std::domain_error for x <= 0.
Var log(const Var& x);
/// Throws std::domain_error for x <= -1.
Var log1p(const Var& x);
Var sigmoid(const Var& x);
/// log(sigmoid(x)) without underflow for large negative x.
Var log_sigmoid(const Var& x);
/// log(sum_i exp(x_i)), shifted by the max for stability. Throws
/// std::invalid_argument for an empty list.
Var logsumexp(std::span<const Var> xs);
/// Sum of a list as a single node.
Var sum(std::span<const Var> xs);

enum class Op { Add, Sub, Mul, Div, Neg, Exp, Log, Log1p, LogSumExp, Sigmoid, LogSigmoid, Sum };

/// Applies `op` to `args` (arity checked), recording on the args' common tape.
Var record(Op op, std::span<const Var> args);

}  // namespace consensus::ad
