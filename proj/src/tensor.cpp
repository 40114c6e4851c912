#include "dmib/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

namespace dmib {

namespace {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

void require_2d(const Tensor& t, const char* who) {
  if (t.shape().size() != 2)
    throw DimensionError(std::string(who) + ": expected a 2-d tensor, got shape " + shape_str(t.shape()));
}

void require_finite(const std::vector<double>& v, const char* who) {
  for (double x : v)
    if (!std::isfinite(x)) throw TrainingError(std::string(who) + ": produced a non-finite value");
}

constexpr double kKlClamp = 1e-12;

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw DimensionError("tensor: shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor: zero dimension in shape " + shape_str(shape));
  d_ = std::make_shared<TensorData>();
  d_->shape = std::move(shape);
  d_->values = std::move(values);
  d_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), 0.0);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

std::size_t Tensor::rows() const {
  require_2d(*this, "rows");
  return d_->shape[0];
}

std::size_t Tensor::cols() const {
  require_2d(*this, "cols");
  return d_->shape[1];
}

double Tensor::item() const {
  if (!is_scalar()) throw UsageError("item: tensor is not a scalar, shape " + shape_str(d_->shape));
  return d_->values[0];
}

const std::vector<double>& Tensor::grad() const {
  if (d_->grad.empty()) throw UsageError("grad: no gradient has been accumulated for this tensor");
  return d_->grad;
}

void accum_grad(TensorData& t, std::size_t index, double value) {
  if (t.grad.empty()) t.grad.assign(t.values.size(), 0.0);
  t.grad[index] += value;
}

void Tape::record(std::shared_ptr<TensorData> out, BackwardFn backward) {
  require_finite(out->values, "forward op");
  nodes_.push_back(Node{std::move(out), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || !loss.is_scalar())
    throw UsageError("backward: loss must be a scalar tensor");
  std::size_t start = nodes_.size();
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (nodes_[i].out == loss.ptr()) {
      start = i;
      break;
    }
  }
  if (start == nodes_.size())
    throw UsageError("backward: loss tensor is not on this tape");
  accum_grad(*loss.ptr(), 0, 1.0);
  for (std::size_t i = start + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (node.out->grad.empty()) continue;  // not reachable from the loss
    node.back(node.out->grad);
  }
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  const std::size_t r = a.rows(), k = a.cols(), c = b.cols();
  std::vector<double> out(r * c, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = av[i * k + kk];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < c; ++j) out[i * c + j] += aik * bv[kk * c + j];
    }
  Tensor result(Shape{r, c}, std::move(out));
  auto ad = a.ptr(), bd = b.ptr();
  tape.record(result.ptr(), [ad, bd, r, k, c](const std::vector<double>& g) {
    // dL/da = g . b^T, dL/db = a^T . g
    if (ad->grad.empty()) ad->grad.assign(ad->values.size(), 0.0);
    if (bd->grad.empty()) bd->grad.assign(bd->values.size(), 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double gij = g[i * c + j];
        if (gij == 0.0) continue;
        for (std::size_t kk = 0; kk < k; ++kk) {
          ad->grad[i * k + kk] += gij * bd->values[kk * c + j];
          bd->grad[kk * c + j] += ad->values[i * k + kk] * gij;
        }
      }
  });
  return result;
}

Tensor add_rowvec(Tape& tape, const Tensor& x, const Tensor& bias) {
  require_2d(x, "add_rowvec");
  const std::size_t r = x.rows(), c = x.cols();
  if (bias.size() != c)
    throw DimensionError("add_rowvec: bias width " + std::to_string(bias.size()) +
                         " does not match " + std::to_string(c) + " columns");
  std::vector<double> out(x.values());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bias.values()[j];
  Tensor result(Shape{r, c}, std::move(out));
  auto xd = x.ptr(), bd = bias.ptr();
  tape.record(result.ptr(), [xd, bd, r, c](const std::vector<double>& g) {
    for (std::size_t i = 0; i < r * c; ++i) accum_grad(*xd, i, g[i]);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) accum_grad(*bd, j, g[i * c + j]);
  });
  return result;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.values()[i];
  Tensor result(a.shape(), std::move(out));
  auto ad = a.ptr(), bd = b.ptr();
  tape.record(result.ptr(), [ad, bd](const std::vector<double>& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      accum_grad(*ad, i, g[i]);
      accum_grad(*bd, i, g[i]);
    }
  });
  return result;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<double> out(a.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.values()[i];
  Tensor result(a.shape(), std::move(out));
  auto ad = a.ptr(), bd = b.ptr();
  tape.record(result.ptr(), [ad, bd](const std::vector<double>& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      accum_grad(*ad, i, g[i] * bd->values[i]);
      accum_grad(*bd, i, g[i] * ad->values[i]);
    }
  });
  return result;
}

Tensor scale(Tape& tape, const Tensor& x, double c) {
  std::vector<double> out(x.values());
  for (double& v : out) v *= c;
  Tensor result(x.shape(), std::move(out));
  auto xd = x.ptr();
  tape.record(result.ptr(), [xd, c](const std::vector<double>& g) {
    for (std::size_t i = 0; i < g.size(); ++i) accum_grad(*xd, i, g[i] * c);
  });
  return result;
}

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  Tensor result = Tensor::scalar(total);
  auto xd = x.ptr();
  tape.record(result.ptr(), [xd](const std::vector<double>& g) {
    for (std::size_t i = 0; i < xd->values.size(); ++i) accum_grad(*xd, i, g[0]);
  });
  return result;
}

Tensor relu(Tape& tape, const Tensor& x) {
  std::vector<double> out(x.values());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  Tensor result(x.shape(), std::move(out));
  auto xd = x.ptr();
  tape.record(result.ptr(), [xd](const std::vector<double>& g) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xd->values[i] > 0.0) accum_grad(*xd, i, g[i]);
  });
  return result;
}

Tensor dropout(Tape& tape, const Tensor& x, double rate, RngState& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ParameterError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  auto xd = x.ptr();
  if (!training || rate == 0.0) {
    Tensor result(x.shape(), x.values());
    tape.record(result.ptr(), [xd](const std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) accum_grad(*xd, i, g[i]);
    });
    return result;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<std::uint8_t> keep(x.size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    keep[i] = rng.next_double() >= rate ? 1 : 0;
    out[i] = keep[i] ? x.values()[i] * keep_scale : 0.0;
  }
  Tensor result(x.shape(), std::move(out));
  tape.record(result.ptr(), [xd, keep = std::move(keep), keep_scale](const std::vector<double>& g) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (keep[i]) accum_grad(*xd, i, g[i] * keep_scale);
  });
  return result;
}

Tensor softmax(Tape& tape, const Tensor& logits) {
  require_2d(logits, "softmax");
  const std::size_t r = logits.rows(), c = logits.cols();
  if (c < 2) throw DimensionError("softmax: needs at least 2 classes, got " + std::to_string(c));
  std::vector<double> out(r * c);
  const auto& z = logits.values();
  for (std::size_t i = 0; i < r; ++i) {
    double m = z[i * c];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, z[i * c + j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = std::exp(z[i * c + j] - m);
      denom += out[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= denom;
  }
  Tensor result(Shape{r, c}, std::move(out));
  auto zd = logits.ptr();
  auto pd = result.ptr();
  tape.record(result.ptr(), [zd, pd, r, c](const std::vector<double>& g) {
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * pd->values[i * c + j];
      for (std::size_t j = 0; j < c; ++j)
        accum_grad(*zd, i * c + j, pd->values[i * c + j] * (g[i * c + j] - dot));
    }
  });
  return result;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels) {
  require_2d(logits, "cross_entropy");
  const std::size_t r = logits.rows(), c = logits.cols();
  if (labels.size() != r)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(r) + " rows");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
      throw DataError("cross_entropy: label " + std::to_string(labels[i]) + " out of range [0, " +
                      std::to_string(c) + ") at row " + std::to_string(i));
  const auto& z = logits.values();
  std::vector<double> probs(r * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    double m = z[i * c];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, z[i * c + j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(z[i * c + j] - m);
      denom += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= denom;
    loss += std::log(denom) - (z[i * c + labels[i]] - m);
  }
  loss /= static_cast<double>(r);
  Tensor result = Tensor::scalar(loss);
  auto zd = logits.ptr();
  tape.record(result.ptr(),
              [zd, probs = std::move(probs), labels, r, c](const std::vector<double>& g) {
                const double gb = g[0] / static_cast<double>(r);
                for (std::size_t i = 0; i < r; ++i)
                  for (std::size_t j = 0; j < c; ++j) {
                    const double onehot = (static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0;
                    accum_grad(*zd, i * c + j, gb * (probs[i * c + j] - onehot));
                  }
              });
  return result;
}

Tensor kl_div(Tape& tape, const Tensor& p, const Tensor& q) {
  require_2d(p, "kl_div");
  require_2d(q, "kl_div");
  if (p.shape() != q.shape())
    throw DimensionError("kl_div: shape mismatch " + shape_str(p.shape()) + " vs " + shape_str(q.shape()));
  const std::size_t r = p.rows(), c = p.cols();
  auto check_rows = [&](const Tensor& t, const char* name) {
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double v = t.values()[i * c + j];
        if (v < -1e-12)
          throw DataError(std::string("kl_div: negative entry in ") + name + " at row " +
                          std::to_string(i));
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-6)
        throw DataError(std::string("kl_div: row ") + std::to_string(i) + " of " + name +
                        " sums to " + std::to_string(s) + ", not a probability vector");
    }
  };
  check_rows(p, "p");
  check_rows(q, "q");
  double loss = 0.0;
  for (std::size_t i = 0; i < r * c; ++i) {
    const double pi = p.values()[i];
    if (pi <= 0.0) continue;  // 0 log(0/q) = 0
    const double qi = std::max(q.values()[i], kKlClamp);
    loss += pi * std::log(pi / qi);
  }
  loss /= static_cast<double>(r);
  Tensor result = Tensor::scalar(loss);
  auto pd = p.ptr(), qd = q.ptr();
  tape.record(result.ptr(), [pd, qd, r, c](const std::vector<double>& g) {
    const double gb = g[0] / static_cast<double>(r);
    for (std::size_t i = 0; i < r * c; ++i) {
      const double pi = std::max(pd->values[i], kKlClamp);
      const double qi = std::max(qd->values[i], kKlClamp);
      accum_grad(*pd, i, gb * (std::log(pi / qi) + 1.0));
      if (qd->values[i] > kKlClamp) accum_grad(*qd, i, -gb * pd->values[i] / qi);
    }
  });
  return result;
}

Tensor hconcat(Tape& tape, const std::vector<Tensor>& xs) {
  if (xs.empty()) throw UsageError("hconcat: empty input list");
  const std::size_t r = xs[0].rows();
  std::size_t total = 0;
  for (const auto& x : xs) {
    require_2d(x, "hconcat");
    if (x.rows() != r)
      throw DimensionError("hconcat: row counts disagree, " + std::to_string(x.rows()) + " vs " +
                           std::to_string(r));
    total += x.cols();
  }
  std::vector<double> out(r * total);
  std::size_t offset = 0;
  for (const auto& x : xs) {
    const std::size_t c = x.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i * total + offset + j] = x.values()[i * c + j];
    offset += c;
  }
  Tensor result(Shape{r, total}, std::move(out));
  std::vector<std::shared_ptr<TensorData>> parents;
  std::vector<std::size_t> widths;
  for (const auto& x : xs) {
    parents.push_back(x.ptr());
    widths.push_back(x.cols());
  }
  tape.record(result.ptr(), [parents, widths, r, total](const std::vector<double>& g) {
    std::size_t offset = 0;
    for (std::size_t b = 0; b < parents.size(); ++b) {
      const std::size_t c = widths[b];
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          accum_grad(*parents[b], i * c + j, g[i * total + offset + j]);
      offset += c;
    }
  });
  return result;
}

Tensor upsample_width(Tape& tape, const Tensor& x, std::size_t d) {
  require_2d(x, "upsample_width");
  const std::size_t r = x.rows(), w = x.cols();
  if (w > d)
    throw DimensionError("upsample_width: input width " + std::to_string(w) +
                         " exceeds target " + std::to_string(d));
  auto xd = x.ptr();
  if (w == d) {
    Tensor result(x.shape(), x.values());
    tape.record(result.ptr(), [xd](const std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) accum_grad(*xd, i, g[i]);
    });
    return result;
  }
  const std::size_t k = (d + w - 1) / w;  // repeats per source column
  std::vector<double> out(r * d);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x.values()[i * w + j / k];
  Tensor result(Shape{r, d}, std::move(out));
  tape.record(result.ptr(), [xd, r, w, d, k](const std::vector<double>& g) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < d; ++j) accum_grad(*xd, i * w + j / k, g[i * d + j]);
  });
  return result;
}

Tensor detach(const Tensor& x) {
  return Tensor(x.shape(), x.values(), false);
}

double grad_check(const TensorProgram& fn, std::vector<Tensor> inputs, double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-3))
    throw ParameterError("grad_check: eps must be in [1e-6, 1e-3], got " + std::to_string(eps));
  for (auto& t : inputs) t.set_requires_grad(true);

  Tape tape;
  Tensor loss = fn(tape, inputs);
  if (!loss.is_scalar()) throw UsageError("grad_check: program must return a scalar");
  for (auto& t : inputs) t.zero_grad();
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs)
    analytic.push_back(t.has_grad() ? t.grad() : std::vector<double>(t.size(), 0.0));

  auto eval = [&](std::vector<Tensor>& ins) {
    Tape scratch;
    return fn(scratch, ins).item();
  };

  double max_err = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& vals = inputs[t].mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + eps;
      const double fp = eval(inputs);
      vals[i] = saved - eps;
      const double fm = eval(inputs);
      vals[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[t][i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace dmib
