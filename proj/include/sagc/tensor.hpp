#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sagc::ad {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;

// Value handle into the autodiff graph. Copies share storage.
class Tensor {
   public:
    Tensor() = default;

    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape);
    static Tensor scalar(double v);
    // Leaf whose gradient is accumulated by Tape::backward.
    static Tensor parameter(Shape shape, std::vector<double> values);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t dim(std::size_t axis) const { return shape().at(axis); }
    std::size_t size() const;
    std::span<const double> data() const;
    // Parameter storage for in-place optimizer updates.
    std::span<double> mutable_data();
    double item() const;
    double at(std::size_t flat_index) const { return data()[flat_index]; }

    bool requires_grad() const;
    // Zeros when no gradient has reached this tensor.
    std::vector<double> grad() const;
    void zero_grad();
    const std::string& op() const;

    const std::shared_ptr<Node>& node() const { return node_; }

   private:
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
    friend Tensor make_op_result(std::string op, Shape shape, std::vector<double> value,
                                 std::vector<Tensor> parents,
                                 std::function<void(std::span<const double>)> backward);

    std::shared_ptr<Node> node_;
};

// Records every op whose inputs require gradients while it is alive; the
// most recently constructed Tape on a thread is the active one. Without an
// active tape ops compute values only.
class Tape {
   public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Accumulates d(loss)/d(p) into every reachable parameter. A tape
    // supports one backward pass.
    void backward(const Tensor& loss);

    std::size_t size() const { return nodes_.size(); }
    void record(std::shared_ptr<Node> node);
    static Tape* active();

   private:
    std::vector<std::shared_ptr<Node>> nodes_;
    Tape* previous_;
    bool consumed_ = false;
};

// Destination segment of every row (edge) of a segmented tensor.
class SegmentIndex {
   public:
    SegmentIndex(std::vector<int> ids, std::size_t n_segments);

    const std::vector<int>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }
    std::size_t segment_count() const { return n_segments_; }

   private:
    std::vector<int> ids_;
    std::size_t n_segments_;
};

// Elementwise with trailing-dimension broadcasting: the smaller operand's
// shape must be a suffix of the larger's, or it must hold one element.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor scale(const Tensor& a, double s);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor leaky_relu(const Tensor& t, double slope);
Tensor elu(const Tensor& t, double alpha = 1.0);
Tensor exp(const Tensor& t);
Tensor log(const Tensor& t);
Tensor pow(const Tensor& t, double exponent);
Tensor clamp_min(const Tensor& t, double lo);

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);
Tensor sum_last_dim(const Tensor& t);

Tensor reshape(const Tensor& t, Shape shape);
Tensor gather_rows(const Tensor& t, std::span<const int> rows);
Tensor concat_last_dim(const std::vector<Tensor>& parts);
// [N, H, F] -> [N, F]
Tensor mean_over_heads(const Tensor& t);

// segments.size() rows in; segments.segment_count() rows out.
Tensor segment_sum(const Tensor& values, const SegmentIndex& segments);
// Softmax over the rows of each segment, independently per column. [E, H].
Tensor segment_softmax(const Tensor& scores, const SegmentIndex& segments);

// Row-wise log-softmax of [N, C].
Tensor log_softmax_rows(const Tensor& t);
// out[i] = t[i, cols[i]] for [N, C].
Tensor pick_per_row(const Tensor& t, std::span<const int> cols);

// Fused graph-attention kernels.
//   z: [N, H, F] per-head node transforms, a: [H, F].
//   scores[e, h] = sum_f a[h,f] * LeakyReLU(z[dst_e,h,f] + z[src_e,h,f])
Tensor edge_attention_scores(const Tensor& z, const Tensor& a, std::span<const int> src,
                             const SegmentIndex& dst, double slope);
//   out[i, h, f] = sum_{e: dst_e = i} alpha[e,h] * (z[src_e,h,f] + edge_emb[e,h,f])
Tensor attention_aggregate(const Tensor& alpha, const Tensor& z, const Tensor& edge_emb,
                           std::span<const int> src, const SegmentIndex& dst);
// Same result with edge_emb = reshape(edge_feat @ edge_weight, [E, H, F]),
// computed without materialising the [E, H, F] embedding.
//   edge_feat: [E, D], edge_weight: [D, H*F]
Tensor attention_aggregate_edges(const Tensor& alpha, const Tensor& z, const Tensor& edge_feat,
                                 const Tensor& edge_weight, std::span<const int> src, const SegmentIndex& dst);

}  // namespace sagc::ad
