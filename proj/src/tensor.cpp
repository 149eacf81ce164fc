#include "sagc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "sagc/error.hpp"

namespace sagc::ad {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::string op;
    std::function<void(std::span<const double>)> backward;
};

namespace {

thread_local Tape* g_active_tape = nullptr;

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
    throw Error(ErrorKind::ShapeMismatch, op + ": " + detail);
}

std::span<double> grad_buffer(Node& n) {
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

bool wants_grad(const Tensor& t) { return t.defined() && t.node()->requires_grad; }

void require_rank(const Tensor& t, std::size_t rank, const std::string& op) {
    if (t.shape().size() != rank) {
        shape_error(op, "expected rank " + std::to_string(rank) + ", got " + shape_string(t.shape()));
    }
}

void check_rows(std::span<const int> rows, std::size_t limit, const std::string& op) {
    for (int r : rows) {
        if (r < 0 || static_cast<std::size_t>(r) >= limit) {
            throw Error(ErrorKind::IndexOutOfRange,
                        op + ": index " + std::to_string(r) + " outside [0, " + std::to_string(limit) + ")");
        }
    }
}

std::size_t trailing_size(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t i = 1; i < s.size(); ++i) n *= s[i];
    return n;
}

}  // namespace

Tensor make_op_result(std::string op, Shape shape, std::vector<double> value,
                      std::vector<Tensor> parents,
                      std::function<void(std::span<const double>)> backward) {
    for (double v : value) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::NumericalFault, "non-finite value produced by " + op);
        }
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = std::move(op);
    Tape* tape = Tape::active();
    const bool any_grad = std::any_of(parents.begin(), parents.end(), wants_grad);
    if (tape != nullptr && any_grad) {
        node->requires_grad = true;
        node->backward = std::move(backward);
        tape->record(node);
    }
    return Tensor(std::move(node));
}

std::size_t element_count(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    if (element_count(shape) != values.size()) {
        shape_error("constant", shape_string(shape) + " with " + std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->op = "constant";
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) {
    const auto n = element_count(shape);
    return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double v) { return constant({}, {v}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    Tensor t = constant(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    t.node_->op = "parameter";
    t.node_->grad.assign(t.node_->value.size(), 0.0);
    return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }
std::span<const double> Tensor::data() const { return node_->value; }
std::span<double> Tensor::mutable_data() { return node_->value; }
bool Tensor::requires_grad() const { return node_->requires_grad; }
const std::string& Tensor::op() const { return node_->op; }

double Tensor::item() const {
    if (size() != 1) shape_error("item", "tensor of shape " + shape_string(shape()) + " is not a scalar");
    return node_->value[0];
}

std::vector<double> Tensor::grad() const {
    if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::shared_ptr<Node> node) { nodes_.push_back(std::move(node)); }

void Tape::backward(const Tensor& loss) {
    if (consumed_) throw Error(ErrorKind::DoubleBackward, "tape already consumed by a backward pass");
    if (!loss.defined() || loss.size() != 1) {
        throw Error(ErrorKind::NonScalarLoss,
                    "loss of shape " + (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
    }
    consumed_ = true;
    if (!loss.requires_grad()) return;
    auto& root = *loss.node();
    grad_buffer(root)[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (n.grad.empty() || !n.backward) continue;
        n.backward(n.grad);
    }
    nodes_.clear();
}

SegmentIndex::SegmentIndex(std::vector<int> ids, std::size_t n_segments)
    : ids_(std::move(ids)), n_segments_(n_segments) {
    check_rows(ids_, n_segments_, "SegmentIndex");
}

// ---------------------------------------------------------------- elementwise

namespace {

bool is_suffix(const Shape& small, const Shape& large) {
    if (small.size() > large.size()) return false;
    return std::equal(small.rbegin(), small.rend(), large.rbegin());
}

Shape broadcast_shape(const Tensor& a, const Tensor& b, const std::string& op) {
    if (a.shape() == b.shape()) return a.shape();
    if (b.size() == 1 || is_suffix(b.shape(), a.shape())) return a.shape();
    if (a.size() == 1 || is_suffix(a.shape(), b.shape())) return b.shape();
    shape_error(op, shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(const std::string& op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
    Shape shape = broadcast_shape(a, b, op);
    const std::size_t n = element_count(shape);
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i % na], bv[i % nb]);
    auto an = a.node();
    auto bn = b.node();
    return make_op_result(op, std::move(shape), std::move(out), {a, b},
                          [an, bn, n, na, nb, da, db](std::span<const double> g) {
                              if (an->requires_grad) {
                                  auto ga = grad_buffer(*an);
                                  for (std::size_t i = 0; i < n; ++i) {
                                      ga[i % na] += g[i] * da(an->value[i % na], bn->value[i % nb]);
                                  }
                              }
                              if (bn->requires_grad) {
                                  auto gb = grad_buffer(*bn);
                                  for (std::size_t i = 0; i < n; ++i) {
                                      gb[i % nb] += g[i] * db(an->value[i % na], bn->value[i % nb]);
                                  }
                              }
                          });
}

template <typename Fwd, typename D>
Tensor unary(const std::string& op, const Tensor& t, Fwd fwd, D deriv) {
    const auto tv = t.data();
    std::vector<double> out(tv.size());
    for (std::size_t i = 0; i < tv.size(); ++i) out[i] = fwd(tv[i]);
    auto tn = t.node();
    return make_op_result(op, t.shape(), std::move(out), {t}, [tn, deriv](std::span<const double> g) {
        auto gt = grad_buffer(*tn);
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i] * deriv(tn->value[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary(
        "add_scalar", a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Tensor scale(const Tensor& a, double s) {
    return unary(
        "scale", a, [s](double x) { return x * s; }, [s](double) { return s; });
}

Tensor leaky_relu(const Tensor& t, double slope) {
    return unary(
        "leaky_relu", t, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

Tensor elu(const Tensor& t, double alpha) {
    return unary(
        "elu", t, [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
        [alpha](double x) { return x > 0.0 ? 1.0 : alpha * std::exp(x); });
}

Tensor exp(const Tensor& t) {
    return unary(
        "exp", t, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Tensor log(const Tensor& t) {
    return unary(
        "log", t, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Tensor pow(const Tensor& t, double exponent) {
    return unary(
        "pow", t, [exponent](double x) { return std::pow(x, exponent); },
        [exponent](double x) { return exponent == 0.0 ? 0.0 : exponent * std::pow(x, exponent - 1.0); });
}

Tensor clamp_min(const Tensor& t, double lo) {
    return unary(
        "clamp_min", t, [lo](double x) { return std::max(x, lo); },
        [lo](double x) { return x >= lo ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------- linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0);
    const std::size_t k = a.dim(1);
    const std::size_t n = b.dim(1);
    if (b.dim(0) != k) shape_error("matmul", shape_string(a.shape()) + " x " + shape_string(b.shape()));
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* row = out.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double x = av[i * k + p];
            const double* brow = bv.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) row[j] += x * brow[j];
        }
    }
    auto an = a.node();
    auto bn = b.node();
    return make_op_result("matmul", {m, n}, std::move(out), {a, b},
                          [an, bn, m, k, n](std::span<const double> g) {
                              if (an->requires_grad) {
                                  auto ga = grad_buffer(*an);
                                  for (std::size_t i = 0; i < m; ++i) {
                                      for (std::size_t p = 0; p < k; ++p) {
                                          double s = 0.0;
#pragma omp simd reduction(+ : s)
                                          for (std::size_t j = 0; j < n; ++j) {
                                              s += g[i * n + j] * bn->value[p * n + j];
                                          }
                                          ga[i * k + p] += s;
                                      }
                                  }
                              }
                              if (bn->requires_grad) {
                                  auto gb = grad_buffer(*bn);
                                  for (std::size_t i = 0; i < m; ++i) {
                                      for (std::size_t p = 0; p < k; ++p) {
                                          const double x = an->value[i * k + p];
                                          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += x * g[i * n + j];
                                      }
                                  }
                              }
                          });
}

// ---------------------------------------------------------------- reductions and shape

Tensor sum(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v;
    auto tn = t.node();
    return make_op_result("sum", {}, {s}, {t}, [tn](std::span<const double> g) {
        auto gt = grad_buffer(*tn);
        for (auto& v : gt) v += g[0];
    });
}

Tensor mean(const Tensor& t) {
    if (t.size() == 0) shape_error("mean", "empty tensor");
    return scale(sum(t), 1.0 / static_cast<double>(t.size()));
}

Tensor sum_last_dim(const Tensor& t) {
    if (t.shape().empty()) shape_error("sum_last_dim", "scalar input");
    Shape shape(t.shape().begin(), t.shape().end() - 1);
    const std::size_t inner = t.shape().back();
    const std::size_t outer = element_count(shape);
    const auto tv = t.data();
    std::vector<double> out(outer, 0.0);
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) out[o] += tv[o * inner + i];
    }
    auto tn = t.node();
    return make_op_result("sum_last_dim", std::move(shape), std::move(out), {t},
                          [tn, inner, outer](std::span<const double> g) {
                              auto gt = grad_buffer(*tn);
                              for (std::size_t o = 0; o < outer; ++o) {
                                  for (std::size_t i = 0; i < inner; ++i) gt[o * inner + i] += g[o];
                              }
                          });
}

Tensor reshape(const Tensor& t, Shape shape) {
    if (element_count(shape) != t.size()) {
        shape_error("reshape", shape_string(t.shape()) + " -> " + shape_string(shape));
    }
    std::vector<double> out(t.data().begin(), t.data().end());
    auto tn = t.node();
    return make_op_result("reshape", std::move(shape), std::move(out), {t}, [tn](std::span<const double> g) {
        auto gt = grad_buffer(*tn);
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
    });
}

Tensor gather_rows(const Tensor& t, std::span<const int> rows) {
    if (t.shape().empty()) shape_error("gather_rows", "scalar input");
    check_rows(rows, t.dim(0), "gather_rows");
    const std::size_t width = trailing_size(t.shape());
    Shape shape = t.shape();
    shape[0] = rows.size();
    const auto tv = t.data();
    std::vector<double> out(rows.size() * width);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(tv.data() + static_cast<std::size_t>(rows[r]) * width, width, out.data() + r * width);
    }
    auto tn = t.node();
    std::vector<int> idx(rows.begin(), rows.end());
    return make_op_result("gather_rows", std::move(shape), std::move(out), {t},
                          [tn, idx = std::move(idx), width](std::span<const double> g) {
                              auto gt = grad_buffer(*tn);
                              for (std::size_t r = 0; r < idx.size(); ++r) {
                                  double* dst = gt.data() + static_cast<std::size_t>(idx[r]) * width;
                                  for (std::size_t c = 0; c < width; ++c) dst[c] += g[r * width + c];
                              }
                          });
}

Tensor concat_last_dim(const std::vector<Tensor>& parts) {
    if (parts.empty()) shape_error("concat_last_dim", "no inputs");
    const Shape& first = parts.front().shape();
    if (first.empty()) shape_error("concat_last_dim", "scalar input");
    const Shape lead(first.begin(), first.end() - 1);
    const std::size_t outer = element_count(lead);
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != first.size() || !std::equal(lead.begin(), lead.end(), s.begin())) {
            shape_error("concat_last_dim", shape_string(first) + " vs " + shape_string(s));
        }
        widths.push_back(s.back());
        total += s.back();
    }
    std::vector<double> out(outer * total);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto pv = parts[k].data();
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(pv.data() + o * widths[k], widths[k], out.data() + o * total + offset);
        }
        offset += widths[k];
    }
    Shape shape = lead;
    shape.push_back(total);
    std::vector<std::shared_ptr<Node>> nodes;
    for (const auto& p : parts) nodes.push_back(p.node());
    return make_op_result("concat_last_dim", std::move(shape), std::move(out), parts,
                          [nodes, widths, outer, total](std::span<const double> g) {
                              std::size_t off = 0;
                              for (std::size_t k = 0; k < nodes.size(); ++k) {
                                  if (nodes[k]->requires_grad) {
                                      auto gp = grad_buffer(*nodes[k]);
                                      for (std::size_t o = 0; o < outer; ++o) {
                                          for (std::size_t c = 0; c < widths[k]; ++c) {
                                              gp[o * widths[k] + c] += g[o * total + off + c];
                                          }
                                      }
                                  }
                                  off += widths[k];
                              }
                          });
}

Tensor mean_over_heads(const Tensor& t) {
    require_rank(t, 3, "mean_over_heads");
    const std::size_t n = t.dim(0);
    const std::size_t h = t.dim(1);
    const std::size_t f = t.dim(2);
    const auto tv = t.data();
    std::vector<double> out(n * f, 0.0);
    const double inv = 1.0 / static_cast<double>(h);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < h; ++k) {
            for (std::size_t c = 0; c < f; ++c) out[i * f + c] += tv[(i * h + k) * f + c];
        }
        for (std::size_t c = 0; c < f; ++c) out[i * f + c] *= inv;
    }
    auto tn = t.node();
    return make_op_result("mean_over_heads", {n, f}, std::move(out), {t},
                          [tn, n, h, f, inv](std::span<const double> g) {
                              auto gt = grad_buffer(*tn);
                              for (std::size_t i = 0; i < n; ++i) {
                                  for (std::size_t k = 0; k < h; ++k) {
                                      for (std::size_t c = 0; c < f; ++c) {
                                          gt[(i * h + k) * f + c] += g[i * f + c] * inv;
                                      }
                                  }
                              }
                          });
}

// ---------------------------------------------------------------- segment ops

Tensor segment_sum(const Tensor& values, const SegmentIndex& segments) {
    if (values.shape().empty() || values.dim(0) != segments.size()) {
        shape_error("segment_sum", shape_string(values.shape()) + " with " +
                                       std::to_string(segments.size()) + " segment ids");
    }
    const std::size_t width = trailing_size(values.shape());
    Shape shape = values.shape();
    shape[0] = segments.segment_count();
    const auto vv = values.data();
    const auto& ids = segments.ids();
    std::vector<double> out(segments.segment_count() * width, 0.0);
    for (std::size_t e = 0; e < ids.size(); ++e) {
        double* dst = out.data() + static_cast<std::size_t>(ids[e]) * width;
        for (std::size_t c = 0; c < width; ++c) dst[c] += vv[e * width + c];
    }
    auto vn = values.node();
    return make_op_result("segment_sum", std::move(shape), std::move(out), {values},
                          [vn, ids, width](std::span<const double> g) {
                              auto gv = grad_buffer(*vn);
                              for (std::size_t e = 0; e < ids.size(); ++e) {
                                  const double* src = g.data() + static_cast<std::size_t>(ids[e]) * width;
                                  for (std::size_t c = 0; c < width; ++c) gv[e * width + c] += src[c];
                              }
                          });
}

Tensor segment_softmax(const Tensor& scores, const SegmentIndex& segments) {
    if (scores.shape().empty() || scores.shape().size() > 2 || scores.dim(0) != segments.size()) {
        shape_error("segment_softmax", shape_string(scores.shape()) + " with " +
                                           std::to_string(segments.size()) + " segment ids");
    }
    const std::size_t e_count = scores.dim(0);
    const std::size_t heads = scores.shape().size() == 2 ? scores.dim(1) : 1;
    const std::size_t segs = segments.segment_count();
    const auto& ids = segments.ids();
    const auto sv = scores.data();

    std::vector<double> peak(segs * heads, -std::numeric_limits<double>::infinity());
    for (std::size_t e = 0; e < e_count; ++e) {
        const std::size_t base = static_cast<std::size_t>(ids[e]) * heads;
        for (std::size_t h = 0; h < heads; ++h) peak[base + h] = std::max(peak[base + h], sv[e * heads + h]);
    }
    std::vector<double> out(e_count * heads);
    std::vector<double> denom(segs * heads, 0.0);
    for (std::size_t e = 0; e < e_count; ++e) {
        const std::size_t base = static_cast<std::size_t>(ids[e]) * heads;
        for (std::size_t h = 0; h < heads; ++h) {
            const double v = std::exp(sv[e * heads + h] - peak[base + h]);
            out[e * heads + h] = v;
            denom[base + h] += v;
        }
    }
    for (std::size_t e = 0; e < e_count; ++e) {
        const std::size_t base = static_cast<std::size_t>(ids[e]) * heads;
        for (std::size_t h = 0; h < heads; ++h) out[e * heads + h] /= denom[base + h];
    }
    auto sn = scores.node();
    std::vector<double> probs = out;
    return make_op_result("segment_softmax", scores.shape(), std::move(out), {scores},
                          [sn, ids, heads, segs, probs = std::move(probs)](std::span<const double> g) {
                              std::vector<double> dot(segs * heads, 0.0);
                              for (std::size_t e = 0; e < ids.size(); ++e) {
                                  const std::size_t base = static_cast<std::size_t>(ids[e]) * heads;
                                  for (std::size_t h = 0; h < heads; ++h) {
                                      dot[base + h] += probs[e * heads + h] * g[e * heads + h];
                                  }
                              }
                              auto gs = grad_buffer(*sn);
                              for (std::size_t e = 0; e < ids.size(); ++e) {
                                  const std::size_t base = static_cast<std::size_t>(ids[e]) * heads;
                                  for (std::size_t h = 0; h < heads; ++h) {
                                      const std::size_t k = e * heads + h;
                                      gs[k] += probs[k] * (g[k] - dot[base + h]);
                                  }
                              }
                          });
}

// ---------------------------------------------------------------- classification helpers

Tensor log_softmax_rows(const Tensor& t) {
    require_rank(t, 2, "log_softmax_rows");
    const std::size_t n = t.dim(0);
    const std::size_t c = t.dim(1);
    const auto tv = t.data();
    std::vector<double> out(n * c);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = tv.data() + i * c;
        const double peak = *std::max_element(row, row + c);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - peak);
        const double lse = peak + std::log(s);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row[j] - lse;
    }
    auto tn = t.node();
    std::vector<double> saved = out;
    return make_op_result("log_softmax_rows", {n, c}, std::move(out), {t},
                          [tn, n, c, saved = std::move(saved)](std::span<const double> g) {
                              auto gt = grad_buffer(*tn);
                              for (std::size_t i = 0; i < n; ++i) {
                                  double gsum = 0.0;
                                  for (std::size_t j = 0; j < c; ++j) gsum += g[i * c + j];
                                  for (std::size_t j = 0; j < c; ++j) {
                                      gt[i * c + j] += g[i * c + j] - std::exp(saved[i * c + j]) * gsum;
                                  }
                              }
                          });
}

Tensor pick_per_row(const Tensor& t, std::span<const int> cols) {
    require_rank(t, 2, "pick_per_row");
    const std::size_t n = t.dim(0);
    const std::size_t c = t.dim(1);
    if (cols.size() != n) shape_error("pick_per_row", std::to_string(cols.size()) + " indices for " + std::to_string(n) + " rows");
    check_rows(cols, c, "pick_per_row");
    const auto tv = t.data();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = tv[i * c + static_cast<std::size_t>(cols[i])];
    auto tn = t.node();
    std::vector<int> idx(cols.begin(), cols.end());
    return make_op_result("pick_per_row", {n}, std::move(out), {t},
                          [tn, c, idx = std::move(idx)](std::span<const double> g) {
                              auto gt = grad_buffer(*tn);
                              for (std::size_t i = 0; i < idx.size(); ++i) {
                                  gt[i * c + static_cast<std::size_t>(idx[i])] += g[i];
                              }
                          });
}

// ---------------------------------------------------------------- fused attention kernels

namespace {

// Branch-free LeakyReLU: max(u, slope*u) equals it for slope <= 1, min for slope > 1.
inline double leaky(double u, double slope) {
    return slope <= 1.0 ? std::max(u, slope * u) : std::min(u, slope * u);
}

// out[c] += g * LeakyReLU(zi[c] + zj[c])
void leaky_value_row(double* __restrict out, const double* zi, const double* zj, double g, double slope,
                     std::size_t n) {
    for (std::size_t c = 0; c < n; ++c) out[c] += g * leaky(zi[c] + zj[c], slope);
}

// out[c] = g * a[c] * LeakyReLU'(zi[c] + zj[c])
void leaky_grad_row(double* __restrict out, const double* zi, const double* zj, const double* a, double g,
                    double slope, std::size_t n) {
    for (std::size_t c = 0; c < n; ++c) {
        const double u = zi[c] + zj[c];
        const double m = u > 0.0 ? 1.0 : slope;
        out[c] = g * a[c] * m;
    }
}

}  // namespace

Tensor edge_attention_scores(const Tensor& z, const Tensor& a, std::span<const int> src,
                             const SegmentIndex& dst, double slope) {
    require_rank(z, 3, "edge_attention_scores");
    require_rank(a, 2, "edge_attention_scores");
    const std::size_t n = z.dim(0);
    const std::size_t heads = z.dim(1);
    const std::size_t f = z.dim(2);
    if (a.dim(0) != heads || a.dim(1) != f) {
        shape_error("edge_attention_scores", "attention " + shape_string(a.shape()) + " for nodes " +
                                                 shape_string(z.shape()));
    }
    if (src.size() != dst.size() || dst.segment_count() != n) {
        shape_error("edge_attention_scores", "edge endpoints disagree with node count");
    }
    check_rows(src, n, "edge_attention_scores");
    const std::size_t e_count = src.size();
    const auto zv = z.data();
    const auto av = a.data();
    const auto& dv = dst.ids();
    std::vector<double> out(e_count * heads);
    for (std::size_t e = 0; e < e_count; ++e) {
        const double* zi = zv.data() + static_cast<std::size_t>(dv[e]) * heads * f;
        const double* zj = zv.data() + static_cast<std::size_t>(src[e]) * heads * f;
        for (std::size_t h = 0; h < heads; ++h) {
            double s = 0.0;
#pragma omp simd reduction(+ : s)
            for (std::size_t c = 0; c < f; ++c) {
                const double u = zi[h * f + c] + zj[h * f + c];
                s += av[h * f + c] * leaky(u, slope);
            }
            out[e * heads + h] = s;
        }
    }
    auto zn = z.node();
    auto an = a.node();
    std::vector<int> sv(src.begin(), src.end());
    return make_op_result(
        "edge_attention_scores", {e_count, heads}, std::move(out), {z, a},
        [zn, an, sv = std::move(sv), dv, heads, f, slope](std::span<const double> g) {
            std::span<double> gz;
            std::span<double> ga;
            if (zn->requires_grad) gz = grad_buffer(*zn);
            if (an->requires_grad) ga = grad_buffer(*an);
            const auto& zv = zn->value;
            const auto& av = an->value;
            const std::size_t hf = heads * f;
            std::vector<double> dz(hf);
            for (std::size_t e = 0; e < sv.size(); ++e) {
                const double* zi = zv.data() + static_cast<std::size_t>(dv[e]) * hf;
                const double* zj = zv.data() + static_cast<std::size_t>(sv[e]) * hf;
                const double* ge = g.data() + e * heads;
                if (!ga.empty()) {
                    for (std::size_t h = 0; h < heads; ++h) {
                        leaky_value_row(ga.data() + h * f, zi + h * f, zj + h * f, ge[h], slope, f);
                    }
                }
                if (!gz.empty()) {
                    for (std::size_t h = 0; h < heads; ++h) {
                        leaky_grad_row(dz.data() + h * f, zi + h * f, zj + h * f, av.data() + h * f, ge[h], slope, f);
                    }
                    double* gi = gz.data() + static_cast<std::size_t>(dv[e]) * hf;
                    double* gj = gz.data() + static_cast<std::size_t>(sv[e]) * hf;
                    for (std::size_t k = 0; k < hf; ++k) gi[k] += dz[k];
                    for (std::size_t k = 0; k < hf; ++k) gj[k] += dz[k];
                }
            }
        });
}

Tensor attention_aggregate(const Tensor& alpha, const Tensor& z, const Tensor& edge_emb,
                           std::span<const int> src, const SegmentIndex& dst) {
    require_rank(alpha, 2, "attention_aggregate");
    require_rank(z, 3, "attention_aggregate");
    require_rank(edge_emb, 3, "attention_aggregate");
    const std::size_t n = z.dim(0);
    const std::size_t heads = z.dim(1);
    const std::size_t f = z.dim(2);
    const std::size_t e_count = src.size();
    if (dst.size() != e_count || dst.segment_count() != n || alpha.dim(0) != e_count ||
        alpha.dim(1) != heads || edge_emb.shape() != Shape{e_count, heads, f}) {
        shape_error("attention_aggregate", "alpha " + shape_string(alpha.shape()) + ", nodes " +
                                               shape_string(z.shape()) + ", edges " +
                                               shape_string(edge_emb.shape()));
    }
    check_rows(src, n, "attention_aggregate");
    const auto alv = alpha.data();
    const auto zv = z.data();
    const auto kv = edge_emb.data();
    const auto& dv = dst.ids();
    const std::size_t hf = heads * f;
    std::vector<double> out(n * hf, 0.0);
    for (std::size_t e = 0; e < e_count; ++e) {
        double* oi = out.data() + static_cast<std::size_t>(dv[e]) * hf;
        const double* zj = zv.data() + static_cast<std::size_t>(src[e]) * hf;
        const double* ke = kv.data() + e * hf;
        for (std::size_t h = 0; h < heads; ++h) {
            const double w = alv[e * heads + h];
            for (std::size_t c = 0; c < f; ++c) oi[h * f + c] += w * (zj[h * f + c] + ke[h * f + c]);
        }
    }
    auto aln = alpha.node();
    auto zn = z.node();
    auto kn = edge_emb.node();
    std::vector<int> sv(src.begin(), src.end());
    return make_op_result(
        "attention_aggregate", {n, heads, f}, std::move(out), {alpha, z, edge_emb},
        [aln, zn, kn, sv = std::move(sv), dv, heads, f, hf](std::span<const double> g) {
            std::span<double> gal;
            std::span<double> gz;
            std::span<double> gk;
            if (aln->requires_grad) gal = grad_buffer(*aln);
            if (zn->requires_grad) gz = grad_buffer(*zn);
            if (kn->requires_grad) gk = grad_buffer(*kn);
            const auto& alv = aln->value;
            const auto& zv = zn->value;
            const auto& kv = kn->value;
            for (std::size_t e = 0; e < sv.size(); ++e) {
                const std::size_t i = static_cast<std::size_t>(dv[e]) * hf;
                const std::size_t j = static_cast<std::size_t>(sv[e]) * hf;
                for (std::size_t h = 0; h < heads; ++h) {
                    const double w = alv[e * heads + h];
                    double acc = 0.0;
                    for (std::size_t c = 0; c < f; ++c) {
                        const std::size_t k = h * f + c;
                        const double go = g[i + k];
                        acc += go * (zv[j + k] + kv[e * hf + k]);
                        if (!gz.empty()) gz[j + k] += w * go;
                        if (!gk.empty()) gk[e * hf + k] += w * go;
                    }
                    if (!gal.empty()) gal[e * heads + h] += acc;
                }
            }
        });
}

Tensor attention_aggregate_edges(const Tensor& alpha, const Tensor& z, const Tensor& edge_feat,
                                 const Tensor& edge_weight, std::span<const int> src, const SegmentIndex& dst) {
    require_rank(alpha, 2, "attention_aggregate_edges");
    require_rank(z, 3, "attention_aggregate_edges");
    require_rank(edge_feat, 2, "attention_aggregate_edges");
    require_rank(edge_weight, 2, "attention_aggregate_edges");
    const std::size_t n = z.dim(0);
    const std::size_t heads = z.dim(1);
    const std::size_t f = z.dim(2);
    const std::size_t e_count = src.size();
    const std::size_t d = edge_feat.dim(1);
    const std::size_t hf = heads * f;
    if (dst.size() != e_count || dst.segment_count() != n || alpha.dim(0) != e_count ||
        alpha.dim(1) != heads || edge_feat.dim(0) != e_count || edge_weight.dim(0) != d ||
        edge_weight.dim(1) != hf) {
        shape_error("attention_aggregate_edges", "alpha " + shape_string(alpha.shape()) + ", nodes " +
                                                     shape_string(z.shape()) + ", edge features " +
                                                     shape_string(edge_feat.shape()) + ", edge weight " +
                                                     shape_string(edge_weight.shape()));
    }
    check_rows(src, n, "attention_aggregate_edges");
    const auto alv = alpha.data();
    const auto zv = z.data();
    const auto kv = edge_feat.data();
    const auto wv = edge_weight.data();
    const auto& dv = dst.ids();

    // pooled[i, h, :] = sum over incoming e of alpha[e, h] * edge_feat[e, :]
    std::vector<double> pooled(n * heads * d, 0.0);
    std::vector<double> out(n * hf, 0.0);
    for (std::size_t e = 0; e < e_count; ++e) {
        const auto i = static_cast<std::size_t>(dv[e]);
        double* oi = out.data() + i * hf;
        const double* zj = zv.data() + static_cast<std::size_t>(src[e]) * hf;
        const double* ke = kv.data() + e * d;
        for (std::size_t h = 0; h < heads; ++h) {
            const double w = alv[e * heads + h];
            for (std::size_t c = 0; c < f; ++c) oi[h * f + c] += w * zj[h * f + c];
            double* pi = pooled.data() + (i * heads + h) * d;
            for (std::size_t q = 0; q < d; ++q) pi[q] += w * ke[q];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t h = 0; h < heads; ++h) {
            const double* pi = pooled.data() + (i * heads + h) * d;
            double* oi = out.data() + i * hf + h * f;
            for (std::size_t q = 0; q < d; ++q) {
                const double* wr = wv.data() + q * hf + h * f;
                for (std::size_t c = 0; c < f; ++c) oi[c] += pi[q] * wr[c];
            }
        }
    }
    auto aln = alpha.node();
    auto zn = z.node();
    auto kn = edge_feat.node();
    auto wn = edge_weight.node();
    std::vector<int> sv(src.begin(), src.end());
    return make_op_result(
        "attention_aggregate_edges", {n, heads, f}, std::move(out), {alpha, z, edge_feat, edge_weight},
        [aln, zn, kn, wn, pooled = std::move(pooled), sv = std::move(sv), dv, n, heads, f, hf,
         d](std::span<const double> g) {
            std::span<double> gal;
            std::span<double> gz;
            std::span<double> gk;
            std::span<double> gw;
            if (aln->requires_grad) gal = grad_buffer(*aln);
            if (zn->requires_grad) gz = grad_buffer(*zn);
            if (kn->requires_grad) gk = grad_buffer(*kn);
            if (wn->requires_grad) gw = grad_buffer(*wn);
            const auto& alv = aln->value;
            const auto& zv = zn->value;
            const auto& kv = kn->value;
            const auto& wv = wn->value;

            // gpooled[i, h, q] = sum_c g[i, h, c] * W[q, h*F + c]
            std::vector<double> gpooled(n * heads * d, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t h = 0; h < heads; ++h) {
                    const double* gi = g.data() + i * hf + h * f;
                    const double* pi = pooled.data() + (i * heads + h) * d;
                    double* gp = gpooled.data() + (i * heads + h) * d;
                    for (std::size_t q = 0; q < d; ++q) {
                        const double* wr = wv.data() + q * hf + h * f;
                        double s = 0.0;
#pragma omp simd reduction(+ : s)
                        for (std::size_t c = 0; c < f; ++c) s += gi[c] * wr[c];
                        gp[q] = s;
                        if (!gw.empty()) {
                            double* gwr = gw.data() + q * hf + h * f;
                            for (std::size_t c = 0; c < f; ++c) gwr[c] += pi[q] * gi[c];
                        }
                    }
                }
            }
            for (std::size_t e = 0; e < sv.size(); ++e) {
                const auto i = static_cast<std::size_t>(dv[e]);
                const std::size_t j = static_cast<std::size_t>(sv[e]) * hf;
                const double* ke = kv.data() + e * d;
                for (std::size_t h = 0; h < heads; ++h) {
                    const double w = alv[e * heads + h];
                    const double* gi = g.data() + i * hf + h * f;
                    const double* gp = gpooled.data() + (i * heads + h) * d;
                    double acc = 0.0;
                    const double* zj = zv.data() + j + h * f;
#pragma omp simd reduction(+ : acc)
                    for (std::size_t c = 0; c < f; ++c) acc += gi[c] * zj[c];
                    if (!gz.empty()) {
                        double* gzj = gz.data() + j + h * f;
                        for (std::size_t c = 0; c < f; ++c) gzj[c] += w * gi[c];
                    }
                    for (std::size_t q = 0; q < d; ++q) {
                        acc += gp[q] * ke[q];
                        if (!gk.empty()) gk[e * d + q] += w * gp[q];
                    }
                    if (!gal.empty()) gal[e * heads + h] += acc;
                }
            }
        });
}

}  // namespace sagc::ad
