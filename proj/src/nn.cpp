#include "scida/nn.hpp"

#include <cmath>

#include "scida/errors.hpp"

namespace scida {

namespace {

constexpr double kNormEps = 1e-5;

// Zero-padded 3x3 im2col: (cin*9) x hw column matrix.
Mat im2col3(const Mat& in, int side) {
    const int cin = static_cast<int>(in.rows());
    const int hw = side * side;
    Mat cols = Mat::Zero(cin * 9, hw);
    for (int c = 0; c < cin; ++c) {
        for (int ky = -1; ky <= 1; ++ky) {
            for (int kx = -1; kx <= 1; ++kx) {
                const int row = c * 9 + (ky + 1) * 3 + (kx + 1);
                for (int y = 0; y < side; ++y) {
                    const int sy = y + ky;
                    if (sy < 0 || sy >= side) continue;
                    const int x0 = std::max(0, -kx);
                    const int x1 = std::min(side, side - kx);
                    for (int x = x0; x < x1; ++x)
                        cols(row, y * side + x) = in(c, sy * side + (x + kx));
                }
            }
        }
    }
    return cols;
}

// Adjoint of im2col3: scatter dcols back to the input feature map.
Mat col2im3(const Mat& dcols, int cin, int side) {
    Mat din = Mat::Zero(cin, side * side);
    for (int c = 0; c < cin; ++c) {
        for (int ky = -1; ky <= 1; ++ky) {
            for (int kx = -1; kx <= 1; ++kx) {
                const int row = c * 9 + (ky + 1) * 3 + (kx + 1);
                for (int y = 0; y < side; ++y) {
                    const int sy = y + ky;
                    if (sy < 0 || sy >= side) continue;
                    const int x0 = std::max(0, -kx);
                    const int x1 = std::min(side, side - kx);
                    for (int x = x0; x < x1; ++x)
                        din(c, sy * side + (x + kx)) += dcols(row, y * side + x);
                }
            }
        }
    }
    return din;
}

Mat avg_pool2(const Mat& in, int side) {
    const int half = side / 2;
    Mat out(in.rows(), half * half);
    for (int c = 0; c < in.rows(); ++c)
        for (int y = 0; y < half; ++y)
            for (int x = 0; x < half; ++x)
                out(c, y * half + x) = 0.25 * (in(c, (2 * y) * side + 2 * x) +
                                               in(c, (2 * y) * side + 2 * x + 1) +
                                               in(c, (2 * y + 1) * side + 2 * x) +
                                               in(c, (2 * y + 1) * side + 2 * x + 1));
    return out;
}

Mat avg_pool2_backward(const Mat& dout, int side) {
    const int half = side / 2;
    Mat din(dout.rows(), side * side);
    for (int c = 0; c < dout.rows(); ++c)
        for (int y = 0; y < half; ++y)
            for (int x = 0; x < half; ++x) {
                const double g = 0.25 * dout(c, y * half + x);
                din(c, (2 * y) * side + 2 * x) = g;
                din(c, (2 * y) * side + 2 * x + 1) = g;
                din(c, (2 * y + 1) * side + 2 * x) = g;
                din(c, (2 * y + 1) * side + 2 * x + 1) = g;
            }
    return din;
}

}  // namespace

void Sgd::step(const std::vector<Param*>& params, double lr) const {
    for (Param* p : params) {
        p->vel = momentum * p->vel + (p->grad + weight_decay * p->value);
        p->value -= lr * p->vel;
    }
}

std::uint64_t hash_params(const std::vector<Param*>& params) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const Param* p : params)
        h = fnv1a(p->value.data(), sizeof(double) * p->value.size(), h);
    return h;
}

void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->zero_grad();
}

Mat sigmoid(const Mat& x) {
    return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Mat leaky_relu(const Mat& x, double slope) {
    return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

// --- Linear -----------------------------------------------------------------

void Linear::init(const std::string& name, int in, int out, Rng& rng) {
    w.init(name + ".w", in, out);
    b.init(name + ".b", 1, out);
    const double scale = std::sqrt(2.0 / in);
    for (int r = 0; r < in; ++r)
        for (int c = 0; c < out; ++c) w.value(r, c) = scale * rng.gaussian();
}

Mat Linear::forward(const Mat& x) const {
    if (x.cols() != w.value.rows())
        throw ShapeError("Linear " + w.name + ": input dim " + std::to_string(x.cols()) +
                         " vs " + std::to_string(w.value.rows()));
    return (x * w.value).rowwise() + b.value.row(0);
}

Mat Linear::backward(const Mat& x, const Mat& dy) {
    w.grad += x.transpose() * dy;
    b.grad.row(0) += dy.colwise().sum();
    return dy * w.value.transpose();
}

// --- Mlp --------------------------------------------------------------------

void Mlp::init(const std::string& name, int in, int hidden, int out, Rng& rng) {
    l1.init(name + ".l1", in, hidden, rng);
    l2.init(name + ".l2", hidden, out, rng);
}

Mat Mlp::forward(const Mat& x, Ctx* ctx) const {
    Mat h = l1.forward(x).cwiseMax(0.0);
    Mat y = l2.forward(h);
    if (ctx) {
        ctx->x = x;
        ctx->h = std::move(h);
    }
    return y;
}

Mat Mlp::backward(const Ctx& ctx, const Mat& dy) {
    Mat dh = l2.backward(ctx.h, dy);
    dh = dh.cwiseProduct((ctx.h.array() > 0.0).cast<double>().matrix());
    return l1.backward(ctx.x, dh);
}

std::vector<Param*> Mlp::params() {
    return {&l1.w, &l1.b, &l2.w, &l2.b};
}

// --- ConvBlock ----------------------------------------------------------------

void ConvBlock::init(const std::string& name, int cin_, int cout_, Rng& rng) {
    cin = cin_;
    cout = cout_;
    w.init(name + ".w", cout, cin * 9);
    b.init(name + ".b", cout, 1);
    gamma.init(name + ".gamma", cout, 1);
    beta.init(name + ".beta", cout, 1);
    gamma.value.setOnes();
    const double scale = std::sqrt(2.0 / (cin * 9));
    for (int r = 0; r < cout; ++r)
        for (int c = 0; c < cin * 9; ++c) w.value(r, c) = scale * rng.gaussian();
}

Mat ConvBlock::forward(const Mat& in, int side, Ctx* ctx) const {
    const int hw = side * side;
    const Mat cols = im2col3(in, side);
    Mat z = w.value * cols;
    z.colwise() += b.value.col(0);

    // instance norm per channel
    Mat xhat(cout, hw);
    Vec istd(cout);
    for (int c = 0; c < cout; ++c) {
        const double mu = z.row(c).mean();
        const double var = (z.row(c).array() - mu).square().mean();
        istd[c] = 1.0 / std::sqrt(var + kNormEps);
        xhat.row(c) = (z.row(c).array() - mu) * istd[c];
    }
    Mat act(cout, hw);
    for (int c = 0; c < cout; ++c)
        act.row(c) = (xhat.row(c).array() * gamma.value(c, 0) + beta.value(c, 0)).cwiseMax(0.0);

    if (ctx) {
        ctx->in = in;
        ctx->xhat = xhat;
        ctx->istd = istd;
        ctx->act = act;
    }
    return avg_pool2(act, side);
}

Mat ConvBlock::backward(const Ctx& ctx, int side, const Mat& dpooled) {
    const int hw = side * side;
    Mat dact = avg_pool2_backward(dpooled, side);
    // ReLU
    for (int c = 0; c < cout; ++c)
        dact.row(c) = dact.row(c).cwiseProduct((ctx.act.row(c).array() > 0.0).cast<double>().matrix());

    // instance norm backward
    Mat dz(cout, hw);
    for (int c = 0; c < cout; ++c) {
        const auto dy = dact.row(c).array();
        const auto xh = ctx.xhat.row(c).array();
        gamma.grad(c, 0) += (dy * xh).sum();
        beta.grad(c, 0) += dy.sum();
        const auto dxhat = dy * gamma.value(c, 0);
        const double m1 = dxhat.mean();
        const double m2 = (dxhat * xh).mean();
        dz.row(c) = (ctx.istd[c] * (dxhat - m1 - xh * m2)).matrix();
    }

    const Mat cols = im2col3(ctx.in, side);
    w.grad += dz * cols.transpose();
    b.grad.col(0) += dz.rowwise().sum();
    const Mat dcols = w.value.transpose() * dz;
    return col2im3(dcols, cin, side);
}

// --- Backbone -----------------------------------------------------------------

void Backbone::init(const std::string& name, int side, int channels, int feature_dim_,
                    const std::vector<int>& widths, Rng& rng) {
    in_side = side;
    in_channels = channels;
    feature_dim = feature_dim_;
    if (side % (1 << widths.size()) != 0)
        throw ConfigError("backbone: image side must be divisible by " +
                          std::to_string(1 << widths.size()));
    blocks.clear();
    int cin = channels;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        ConvBlock blk;
        blk.init(name + ".block" + std::to_string(i), cin, widths[i], rng);
        blocks.push_back(std::move(blk));
        cin = widths[i];
    }
    proj.init(name + ".proj", flatten_dim(), feature_dim, rng);
}

int Backbone::flatten_dim() const {
    const int final_side = in_side >> blocks.size();
    return blocks.back().cout * final_side * final_side;
}

Mat Backbone::forward(const Mat& images, Ctx* ctx) const {
    if (images.cols() != in_channels * in_side * in_side)
        throw ShapeError("backbone: expected images of " +
                         std::to_string(in_channels * in_side * in_side) + " pixels, got " +
                         std::to_string(images.cols()));
    const int n = static_cast<int>(images.rows());
    Mat flat(n, flatten_dim());
    if (ctx) ctx->per_sample.assign(n, {});
    for (int i = 0; i < n; ++i) {
        Mat fm(in_channels, in_side * in_side);  // channels x hw
        for (int c = 0; c < in_channels; ++c)
            for (int p = 0; p < in_side * in_side; ++p)
                fm(c, p) = images(i, c * in_side * in_side + p);

        int side = in_side;
        std::vector<ConvBlock::Ctx> caches(ctx ? blocks.size() : 0);
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
            fm = blocks[bi].forward(fm, side, ctx ? &caches[bi] : nullptr);
            side /= 2;
        }
        for (int c = 0; c < fm.rows(); ++c)
            for (int p = 0; p < fm.cols(); ++p)
                flat(i, c * fm.cols() + p) = fm(c, p);
        if (ctx) ctx->per_sample[i] = std::move(caches);
    }
    Mat feats = proj.forward(flat);
    if (ctx) ctx->flat = std::move(flat);
    return feats;
}

void Backbone::backward(const Ctx& ctx, const Mat& dfeat) {
    const Mat dflat = proj.backward(ctx.flat, dfeat);
    const int n = static_cast<int>(dfeat.rows());
    const int final_side = in_side >> blocks.size();
    for (int i = 0; i < n; ++i) {
        Mat d(blocks.back().cout, final_side * final_side);
        for (int c = 0; c < d.rows(); ++c)
            for (int p = 0; p < d.cols(); ++p) d(c, p) = dflat(i, c * d.cols() + p);
        int side = final_side;
        for (int bi = static_cast<int>(blocks.size()) - 1; bi >= 0; --bi) {
            side *= 2;
            d = blocks[bi].backward(ctx.per_sample[i][bi], side, d);
        }
    }
}

std::vector<Param*> Backbone::params() {
    std::vector<Param*> out;
    for (auto& blk : blocks)
        for (Param* p : blk.params()) out.push_back(p);
    for (Param* p : proj.params()) out.push_back(p);
    return out;
}

// --- Gcn ----------------------------------------------------------------------

void Gcn::init(const std::string& name, int d, int hidden, int out, Rng& rng) {
    w0.init(name + ".w0", d, hidden);
    w1.init(name + ".w1", hidden, out);
    const double s0 = std::sqrt(2.0 / d);
    const double s1 = std::sqrt(2.0 / hidden);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < hidden; ++c) w0.value(r, c) = s0 * rng.gaussian();
    for (int r = 0; r < hidden; ++r)
        for (int c = 0; c < out; ++c) w1.value(r, c) = s1 * rng.gaussian();
}

Mat Gcn::forward(const Mat& adjacency, const Mat& h0, Ctx* ctx) const {
    if (adjacency.rows() != adjacency.cols() || adjacency.rows() != h0.rows())
        throw ShapeError("gcn: adjacency/embedding dimension mismatch");
    if (h0.cols() != w0.value.rows())
        throw ShapeError("gcn: embedding dim " + std::to_string(h0.cols()) + " vs W0 rows " +
                         std::to_string(w0.value.rows()));
    Mat ah0 = adjacency * h0;
    Mat h1_pre = ah0 * w0.value;
    Mat h1 = leaky_relu(h1_pre, slope);
    Mat ah1 = adjacency * h1;
    Mat out = ah1 * w1.value;
    if (ctx) {
        ctx->a = adjacency;
        ctx->h0 = h0;
        ctx->ah0 = std::move(ah0);
        ctx->h1_pre = std::move(h1_pre);
        ctx->h1 = std::move(h1);
        ctx->ah1 = std::move(ah1);
    }
    return out;
}

Mat Gcn::backward(const Ctx& ctx, const Mat& dout) {
    w1.grad += ctx.ah1.transpose() * dout;
    Mat dah1 = dout * w1.value.transpose();
    Mat dh1 = ctx.a.transpose() * dah1;
    Mat dh1_pre = dh1.cwiseProduct(ctx.h1_pre.unaryExpr(
        [this](double v) { return v > 0.0 ? 1.0 : slope; }));
    w0.grad += ctx.ah0.transpose() * dh1_pre;
    Mat dah0 = dh1_pre * w0.value.transpose();
    return ctx.a.transpose() * dah0;
}

// --- fuse ----------------------------------------------------------------------

Mat fuse_forward(const Mat& f_fc, const Mat& gcn_out) {
    if (f_fc.cols() != gcn_out.cols())
        throw ShapeError("fuse: feature dim " + std::to_string(f_fc.cols()) + " vs GCN output " +
                         std::to_string(gcn_out.cols()));
    return f_fc * gcn_out.transpose();
}

void fuse_backward(const Mat& f_fc, const Mat& gcn_out, const Mat& dlogits, Mat* df_fc,
                   Mat* dgcn_out) {
    if (df_fc) *df_fc = dlogits * gcn_out;
    if (dgcn_out) *dgcn_out = dlogits.transpose() * f_fc;
}

Mat make_label_embedding(int k, int d, std::uint64_t seed) {
    if (k < 1 || d < 1) throw ConfigError("label embedding: K and d must be >= 1");
    Rng rng(sub_seed(seed, "label-embedding"));
    Mat m(k, d);
    for (int r = 0; r < k; ++r) {
        for (int c = 0; c < d; ++c) m(r, c) = rng.gaussian();
        const double norm = m.row(r).norm();
        if (norm > 0.0) m.row(r) /= norm;
    }
    return m;
}

}  // namespace scida
