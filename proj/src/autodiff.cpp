#include "consensus/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace consensus::ad {

void Tape::reserve(std::size_t nodes, std::size_t edges) {
  values_.reserve(nodes);
  edge_begin_.reserve(nodes + 1);
  edges_.reserve(edges);
}

Var Tape::input(double value) {
  Var v = push(value, std::span<const Edge>{});
  inputs_.push_back(v.id_);
  return v;
}

Var Tape::constant(double value) { return push(value, std::span<const Edge>{}); }

Var Tape::push(double value, std::initializer_list<Edge> edges) {
  return push(value, std::span<const Edge>(edges.begin(), edges.size()));
}

Var Tape::push(double value, std::span<const Edge> edges) {
  const auto id = static_cast<std::uint32_t>(values_.size());
  values_.push_back(value);
  edges_.insert(edges_.end(), edges.begin(), edges.end());
  edge_begin_.push_back(static_cast<std::uint32_t>(edges_.size()));
  return Var(this, id);
}

Eigen::VectorXd Tape::gradient(Var output) const {
  check(output);
  std::vector<double> adjoint(output.id_ + 1, 0.0);
  adjoint[output.id_] = 1.0;
  for (std::uint32_t n = output.id_ + 1; n-- > 0;) {
    const double a = adjoint[n];
    if (a == 0.0) continue;
    for (std::uint32_t e = edge_begin_[n]; e < edge_begin_[n + 1]; ++e)
      adjoint[edges_[e].parent] += a * edges_[e].partial;
  }
  Eigen::VectorXd grad(inputs_.size());
  for (std::size_t i = 0; i < inputs_.size(); ++i)
    grad[static_cast<Eigen::Index>(i)] = inputs_[i] <= output.id_ ? adjoint[inputs_[i]] : 0.0;
  return grad;
}

namespace {

Tape& common_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid()) throw std::logic_error("uninitialized variable");
  a.tape()->check(b);
  return *a.tape();
}

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw std::logic_error("uninitialized variable");
  return *a.tape();
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  return common_tape(a, b).push(a.value() + b.value(), {{a.id(), 1.0}, {b.id(), 1.0}});
}
Var operator-(const Var& a, const Var& b) {
  return common_tape(a, b).push(a.value() - b.value(), {{a.id(), 1.0}, {b.id(), -1.0}});
}
Var operator*(const Var& a, const Var& b) {
  return common_tape(a, b).push(a.value() * b.value(),
                                {{a.id(), b.value()}, {b.id(), a.value()}});
}
Var operator/(const Var& a, const Var& b) {
  Tape& t = common_tape(a, b);
  const double d = b.value();
  if (d == 0.0) throw std::domain_error("division by zero");
  const double q = a.value() / d;
  return t.push(q, {{a.id(), 1.0 / d}, {b.id(), -q / d}});
}
Var operator-(const Var& a) { return tape_of(a).push(-a.value(), {{a.id(), -1.0}}); }

Var operator+(const Var& a, double b) { return tape_of(a).push(a.value() + b, {{a.id(), 1.0}}); }
Var operator+(double a, const Var& b) { return b + a; }
Var operator-(const Var& a, double b) { return tape_of(a).push(a.value() - b, {{a.id(), 1.0}}); }
Var operator-(double a, const Var& b) { return tape_of(b).push(a - b.value(), {{b.id(), -1.0}}); }
Var operator*(const Var& a, double b) { return tape_of(a).push(a.value() * b, {{a.id(), b}}); }
Var operator*(double a, const Var& b) { return b * a; }
Var operator/(const Var& a, double b) {
  if (b == 0.0) throw std::domain_error("division by zero");
  return tape_of(a).push(a.value() / b, {{a.id(), 1.0 / b}});
}
Var operator/(double a, const Var& b) {
  const double d = b.value();
  if (d == 0.0) throw std::domain_error("division by zero");
  return tape_of(b).push(a / d, {{b.id(), -a / (d * d)}});
}

Var& operator+=(Var& a, const Var& b) { return a = a + b; }
Var& operator-=(Var& a, const Var& b) { return a = a - b; }

Var exp(const Var& x) {
  const double v = std::exp(x.value());
  return tape_of(x).push(v, {{x.id(), v}});
}

Var log(const Var& x) {
  const double v = x.value();
  if (!(v > 0.0)) throw std::domain_error("log of non-positive value " + std::to_string(v));
  return tape_of(x).push(std::log(v), {{x.id(), 1.0 / v}});
}

Var log1p(const Var& x) {
  const double v = x.value();
  if (!(v > -1.0)) throw std::domain_error("log1p of value <= -1");
  return tape_of(x).push(std::log1p(v), {{x.id(), 1.0 / (1.0 + v)}});
}

namespace {
double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
double log_sigmoid_value(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}
}  // namespace

Var sigmoid(const Var& x) {
  const double s = sigmoid_value(x.value());
  return tape_of(x).push(s, {{x.id(), s * (1.0 - s)}});
}

Var log_sigmoid(const Var& x) {
  const double v = x.value();
  return tape_of(x).push(log_sigmoid_value(v), {{x.id(), sigmoid_value(-v)}});
}

Var logsumexp(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("logsumexp of empty list");
  Tape& t = tape_of(xs.front());
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& x : xs) {
    t.check(x);
    m = std::max(m, x.value());
  }
  if (std::isinf(m)) {
    // all -inf (or some +inf): value is m and the partials are degenerate
    std::vector<Edge> edges;
    for (const auto& x : xs) edges.push_back({x.id(), 0.0});
    return t.push(m, edges);
  }
  double s = 0.0;
  for (const auto& x : xs) s += std::exp(x.value() - m);
  const double lse = m + std::log(s);
  Edge buf[8];
  std::vector<Edge> heap;
  std::span<Edge> edges;
  if (xs.size() <= 8) {
    edges = std::span<Edge>(buf, xs.size());
  } else {
    heap.resize(xs.size());
    edges = heap;
  }
  for (std::size_t i = 0; i < xs.size(); ++i)
    edges[i] = {xs[i].id(), std::exp(xs[i].value() - m) / s};
  return t.push(lse, std::span<const Edge>(edges.data(), edges.size()));
}

Var sum(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("sum of empty list");
  Tape& t = tape_of(xs.front());
  std::vector<Edge> edges;
  edges.reserve(xs.size());
  double s = 0.0;
  for (const auto& x : xs) {
    t.check(x);
    s += x.value();
    edges.push_back({x.id(), 1.0});
  }
  return t.push(s, edges);
}

Var record(Op op, std::span<const Var> args) {
  auto need = [&](std::size_t n) {
    if (args.size() != n) throw std::invalid_argument("wrong number of arguments for op");
  };
  switch (op) {
    case Op::Add: need(2); return args[0] + args[1];
    case Op::Sub: need(2); return args[0] - args[1];
    case Op::Mul: need(2); return args[0] * args[1];
    case Op::Div: need(2); return args[0] / args[1];
    case Op::Neg: need(1); return -args[0];
    case Op::Exp: need(1); return exp(args[0]);
    case Op::Log: need(1); return log(args[0]);
    case Op::Log1p: need(1); return log1p(args[0]);
    case Op::Sigmoid: need(1); return sigmoid(args[0]);
    case Op::LogSigmoid: need(1); return log_sigmoid(args[0]);
    case Op::LogSumExp: return logsumexp(args);
    case Op::Sum: return sum(args);
  }
  throw std::invalid_argument("unknown op");
}

}  // namespace consensus::ad
