#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scida/dataset.hpp"
#include "scida/rng.hpp"

namespace scida {

// Minimal dense/conv substrate with explicit forward caches and hand-written
// backward passes. Batches are row-major: one sample per row. Forward passes
// are read-only on parameters; gradient accumulation and updates belong to
// the single trainer thread.

struct Param {
    std::string name;
    Mat value;
    Mat grad;
    Mat vel;  // SGD momentum buffer

    void init(const std::string& n, int rows, int cols) {
        name = n;
        value = Mat::Zero(rows, cols);
        grad = Mat::Zero(rows, cols);
        vel = Mat::Zero(rows, cols);
    }
    void zero_grad() { grad.setZero(); }
};

// Decay-coupled SGD with momentum: v <- m*v + (g + wd*w); w <- w - lr*v.
struct Sgd {
    double momentum = 0.9;
    double weight_decay = 1e-4;
    void step(const std::vector<Param*>& params, double lr) const;
};

std::uint64_t hash_params(const std::vector<Param*>& params);
void zero_grads(const std::vector<Param*>& params);

Mat sigmoid(const Mat& x);
Mat leaky_relu(const Mat& x, double slope);

// ---------------------------------------------------------------------------

struct Linear {
    Param w;  // in x out
    Param b;  // 1 x out

    void init(const std::string& name, int in, int out, Rng& rng);
    Mat forward(const Mat& x) const;
    Mat backward(const Mat& x, const Mat& dy);  // accumulates grads, returns dx
    std::vector<Param*> params() { return {&w, &b}; }
};

// Two fully connected layers with a ReLU in between; used for the classifier
// heads and the FC head.
struct Mlp {
    Linear l1, l2;

    struct Ctx {
        Mat x, h;
    };

    void init(const std::string& name, int in, int hidden, int out, Rng& rng);
    Mat forward(const Mat& x, Ctx* ctx = nullptr) const;
    Mat backward(const Ctx& ctx, const Mat& dy);
    std::vector<Param*> params();
};

// ---------------------------------------------------------------------------

// conv3x3 (pad 1) -> instance norm -> ReLU -> 2x2 average pool
struct ConvBlock {
    Param w;      // cout x (cin*9)
    Param b;      // cout x 1
    Param gamma;  // cout x 1
    Param beta;   // cout x 1
    int cin = 0, cout = 0;

    struct Ctx {
        Mat in;    // cin x hw, pre-conv input
        Mat xhat;  // cout x hw, normalized activations
        Vec istd;  // cout
        Mat act;   // cout x hw, post-ReLU (pre-pool)
    };

    void init(const std::string& name, int cin_, int cout_, Rng& rng);
    // feature maps are (channels x H*W) per sample
    Mat forward(const Mat& in, int side, Ctx* ctx) const;        // returns cout x (side/2)^2
    Mat backward(const Ctx& ctx, int side, const Mat& dpooled);  // returns dIn
    std::vector<Param*> params() { return {&w, &b, &gamma, &beta}; }
};

// Four conv blocks followed by a linear projection to the feature dimension.
struct Backbone {
    std::vector<ConvBlock> blocks;
    Linear proj;
    int in_side = 0, in_channels = 0, feature_dim = 0;

    struct Ctx {
        std::vector<std::vector<ConvBlock::Ctx>> per_sample;  // [sample][block]
        Mat flat;                                             // N x flatten_dim
    };

    void init(const std::string& name, int side, int channels, int feature_dim,
              const std::vector<int>& widths, Rng& rng);
    Mat forward(const Mat& images, Ctx* ctx = nullptr) const;  // N x (C*H*W) -> N x F
    void backward(const Ctx& ctx, const Mat& dfeat);           // gradient sink (no dImages)
    std::vector<Param*> params();
    int flatten_dim() const;
};

// ---------------------------------------------------------------------------

// Two-layer graph convolution over the label graph:
//   H1 = LeakyReLU(A H0 W0), out = A H1 W1   (final layer has no nonlinearity)
struct Gcn {
    Param w0;  // d x hidden
    Param w1;  // hidden x out
    double slope = 0.2;

    struct Ctx {
        Mat a, h0, ah0, h1_pre, h1, ah1;
    };

    void init(const std::string& name, int d, int hidden, int out, Rng& rng);
    Mat forward(const Mat& adjacency, const Mat& h0, Ctx* ctx = nullptr) const;  // K x out
    Mat backward(const Ctx& ctx, const Mat& dout);  // accumulates grads, returns dH0
    std::vector<Param*> params() { return {&w0, &w1}; }
};

// Scalar-product fusion: logits(n, i) = dot(gcn_out row i, f_fc row n).
Mat fuse_forward(const Mat& f_fc, const Mat& gcn_out);
void fuse_backward(const Mat& f_fc, const Mat& gcn_out, const Mat& dlogits, Mat* df_fc,
                   Mat* dgcn_out);

// Deterministic seeded label embedding: unit-norm Gaussian rows.
Mat make_label_embedding(int k, int d, std::uint64_t seed);

}  // namespace scida
