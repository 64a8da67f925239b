#include "trafficbench/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tb {

namespace {

constexpr std::uint64_t kInitSalt = 0x1a17;
constexpr std::uint64_t kShuffleSalt = 0x50ff1e;

void affine(const DenseLayer& l, std::span<const double> in, std::vector<double>& out) {
    const std::size_t rows = l.w.rows, cols = l.w.cols;
    out.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = l.b[r];
        const double* wr = l.w.data.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * in[c];
        out[r] = acc;
    }
}

// din += W^T dout
void add_transposed(const Matrix& w, std::span<const double> dout, std::span<double> din) {
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double g = dout[r];
        if (g == 0.0) continue;
        const double* wr = w.data.data() + r * w.cols;
        for (std::size_t c = 0; c < w.cols; ++c) din[c] += wr[c] * g;
    }
}

// gw += dout * in^T
void acc_outer(Matrix& gw, std::span<const double> dout, std::span<const double> in) {
    for (std::size_t r = 0; r < gw.rows; ++r) {
        const double g = dout[r];
        if (g == 0.0) continue;
        double* gr = gw.data.data() + r * gw.cols;
        for (std::size_t c = 0; c < gw.cols; ++c) gr[c] += g * in[c];
    }
}

void acc_vec(std::vector<double>& gb, std::span<const double> d) {
    for (std::size_t i = 0; i < d.size(); ++i) gb[i] += d[i];
}

struct Workspace {
    // mlp: pre/act per dense layer. cnn1d: pre/act per conv layer (ch-major,
    // [ch*L]). rnn: act[layer] holds the hidden sequence [t*hidden].
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> act;
    std::vector<double> logits;
};

void forward_mlp(const NeuralModel& m, std::span<const double> x, Workspace& ws) {
    ws.pre.resize(m.dense.size());
    ws.act.resize(m.dense.size());
    std::span<const double> in = x;
    for (std::size_t i = 0; i < m.dense.size(); ++i) {
        affine(m.dense[i], in, ws.pre[i]);
        ws.act[i] = ws.pre[i];
        for (double& v : ws.act[i]) v = v > 0.0 ? v : 0.0;
        in = ws.act[i];
    }
    affine(m.head, in, ws.logits);
}

void backward_mlp(const NeuralModel& m, std::span<const double> x, const Workspace& ws,
                  std::span<const double> dlogits, NeuralModel* grads, std::span<double> dx) {
    std::span<const double> head_in = m.dense.empty() ? x : std::span<const double>(ws.act.back());
    if (grads) {
        acc_outer(grads->head.w, dlogits, head_in);
        acc_vec(grads->head.b, dlogits);
    }
    std::vector<double> dcur(head_in.size(), 0.0);
    add_transposed(m.head.w, dlogits, dcur);
    for (std::size_t i = m.dense.size(); i-- > 0;) {
        for (std::size_t u = 0; u < dcur.size(); ++u)
            if (ws.pre[i][u] <= 0.0) dcur[u] = 0.0;
        std::span<const double> in = i == 0 ? x : std::span<const double>(ws.act[i - 1]);
        if (grads) {
            acc_outer(grads->dense[i].w, dcur, in);
            acc_vec(grads->dense[i].b, dcur);
        }
        std::vector<double> dnext(in.size(), 0.0);
        add_transposed(m.dense[i].w, dcur, dnext);
        dcur = std::move(dnext);
    }
    if (!dx.empty())
        for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += dcur[j];
}

void forward_cnn(const NeuralModel& m, std::span<const double> x, Workspace& ws) {
    const std::size_t L = m.input_dim;
    ws.pre.resize(m.conv.size());
    ws.act.resize(m.conv.size());
    std::span<const double> in = x;  // 1 channel x L
    for (std::size_t i = 0; i < m.conv.size(); ++i) {
        const auto& cl = m.conv[i];
        const std::size_t pad = (cl.kernel - 1) / 2;
        auto& pre = ws.pre[i];
        pre.assign(cl.out_ch * L, 0.0);
        for (std::size_t f = 0; f < cl.out_ch; ++f)
            for (std::size_t t = 0; t < L; ++t) {
                double acc = cl.b[f];
                for (std::size_t c = 0; c < cl.in_ch; ++c)
                    for (std::size_t k = 0; k < cl.kernel; ++k) {
                        const std::ptrdiff_t s =
                            static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad);
                        if (s < 0 || s >= static_cast<std::ptrdiff_t>(L)) continue;
                        acc += cl.at(f, c, k) * in[c * L + static_cast<std::size_t>(s)];
                    }
                pre[f * L + t] = acc;
            }
        ws.act[i] = pre;
        for (double& v : ws.act[i]) v = v > 0.0 ? v : 0.0;
        in = ws.act[i];
    }
    affine(m.head, in, ws.logits);
}

void backward_cnn(const NeuralModel& m, std::span<const double> x, const Workspace& ws,
                  std::span<const double> dlogits, NeuralModel* grads, std::span<double> dx) {
    const std::size_t L = m.input_dim;
    std::span<const double> head_in(ws.act.back());
    if (grads) {
        acc_outer(grads->head.w, dlogits, head_in);
        acc_vec(grads->head.b, dlogits);
    }
    std::vector<double> dcur(head_in.size(), 0.0);
    add_transposed(m.head.w, dlogits, dcur);

    for (std::size_t i = m.conv.size(); i-- > 0;) {
        const auto& cl = m.conv[i];
        const std::size_t pad = (cl.kernel - 1) / 2;
        for (std::size_t u = 0; u < dcur.size(); ++u)
            if (ws.pre[i][u] <= 0.0) dcur[u] = 0.0;
        std::span<const double> in = i == 0 ? x : std::span<const double>(ws.act[i - 1]);
        std::vector<double> din(cl.in_ch * L, 0.0);
        for (std::size_t f = 0; f < cl.out_ch; ++f)
            for (std::size_t t = 0; t < L; ++t) {
                const double g = dcur[f * L + t];
                if (g == 0.0) continue;
                if (grads) grads->conv[i].b[f] += g;
                for (std::size_t c = 0; c < cl.in_ch; ++c)
                    for (std::size_t k = 0; k < cl.kernel; ++k) {
                        const std::ptrdiff_t s =
                            static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(pad);
                        if (s < 0 || s >= static_cast<std::ptrdiff_t>(L)) continue;
                        const std::size_t si = static_cast<std::size_t>(s);
                        if (grads)
                            grads->conv[i].w[(f * cl.in_ch + c) * cl.kernel + k] +=
                                g * in[c * L + si];
                        din[c * L + si] += cl.at(f, c, k) * g;
                    }
            }
        dcur = std::move(din);
    }
    if (!dx.empty())
        for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += dcur[j];
}

void forward_rnn(const NeuralModel& m, std::span<const double> x, Workspace& ws) {
    const std::size_t L = m.input_dim;
    ws.act.resize(m.rec.size());
    std::vector<double> scratch;
    for (std::size_t i = 0; i < m.rec.size(); ++i) {
        const auto& rl = m.rec[i];
        const std::size_t hid = rl.wx.rows, in_dim = rl.wx.cols;
        ws.act[i].assign(L * hid, 0.0);
        for (std::size_t t = 0; t < L; ++t) {
            scratch.assign(hid, 0.0);
            for (std::size_t h = 0; h < hid; ++h) {
                double acc = rl.b[h];
                const double* wxr = rl.wx.data.data() + h * in_dim;
                if (i == 0) {
                    acc += wxr[0] * x[t];
                } else {
                    const double* prev = ws.act[i - 1].data() + t * in_dim;
                    for (std::size_t c = 0; c < in_dim; ++c) acc += wxr[c] * prev[c];
                }
                if (t > 0) {
                    const double* hp = ws.act[i].data() + (t - 1) * hid;
                    const double* whr = rl.wh.data.data() + h * hid;
                    for (std::size_t c = 0; c < hid; ++c) acc += whr[c] * hp[c];
                }
                scratch[h] = std::tanh(acc);
            }
            std::copy(scratch.begin(), scratch.end(), ws.act[i].begin() + t * hid);
        }
    }
    const std::size_t top_hid = m.rec.back().wx.rows;
    std::span<const double> last(ws.act.back().data() + (L - 1) * top_hid, top_hid);
    affine(m.head, last, ws.logits);
}

void backward_rnn(const NeuralModel& m, std::span<const double> x, const Workspace& ws,
                  std::span<const double> dlogits, NeuralModel* grads, std::span<double> dx) {
    const std::size_t L = m.input_dim;
    const std::size_t n_layers = m.rec.size();
    std::vector<std::vector<double>> dh(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) dh[i].assign(L * m.rec[i].wx.rows, 0.0);

    const std::size_t top_hid = m.rec.back().wx.rows;
    std::span<const double> last(ws.act.back().data() + (L - 1) * top_hid, top_hid);
    if (grads) {
        acc_outer(grads->head.w, dlogits, last);
        acc_vec(grads->head.b, dlogits);
    }
    add_transposed(m.head.w, dlogits,
                   std::span<double>(dh.back().data() + (L - 1) * top_hid, top_hid));

    std::vector<double> dz;
    for (std::size_t i = n_layers; i-- > 0;) {
        const auto& rl = m.rec[i];
        const std::size_t hid = rl.wx.rows, in_dim = rl.wx.cols;
        for (std::size_t t = L; t-- > 0;) {
            dz.assign(hid, 0.0);
            for (std::size_t h = 0; h < hid; ++h) {
                const double a = ws.act[i][t * hid + h];
                dz[h] = dh[i][t * hid + h] * (1.0 - a * a);
            }
            std::span<const double> in =
                i == 0 ? std::span<const double>(&x[t], 1)
                       : std::span<const double>(ws.act[i - 1].data() + t * in_dim, in_dim);
            if (grads) {
                acc_outer(grads->rec[i].wx, dz, in);
                acc_vec(grads->rec[i].b, dz);
                if (t > 0)
                    acc_outer(grads->rec[i].wh, dz,
                              std::span<const double>(ws.act[i].data() + (t - 1) * hid, hid));
            }
            if (i == 0) {
                if (!dx.empty()) {
                    double acc = 0.0;
                    for (std::size_t h = 0; h < hid; ++h) acc += rl.wx(h, 0) * dz[h];
                    dx[t] += acc;
                }
            } else {
                add_transposed(rl.wx, dz,
                               std::span<double>(dh[i - 1].data() + t * in_dim, in_dim));
            }
            if (t > 0)
                add_transposed(rl.wh, dz, std::span<double>(dh[i].data() + (t - 1) * hid, hid));
        }
    }
}

void forward(const NeuralModel& m, std::span<const double> x, Workspace& ws) {
    if (x.size() != m.input_dim) throw tb_error("neural: feature dimension mismatch");
    switch (m.kind) {
        case NeuralKind::mlp: forward_mlp(m, x, ws); break;
        case NeuralKind::cnn1d: forward_cnn(m, x, ws); break;
        case NeuralKind::rnn: forward_rnn(m, x, ws); break;
    }
}

void backward(const NeuralModel& m, std::span<const double> x, const Workspace& ws,
              std::span<const double> dlogits, NeuralModel* grads, std::span<double> dx) {
    switch (m.kind) {
        case NeuralKind::mlp: backward_mlp(m, x, ws, dlogits, grads, dx); break;
        case NeuralKind::cnn1d: backward_cnn(m, x, ws, dlogits, grads, dx); break;
        case NeuralKind::rnn: backward_rnn(m, x, ws, dlogits, grads, dx); break;
    }
}

Matrix glorot(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
              Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(rows, cols);
    for (double& v : w.data) v = rng.uniform(-a, a);
    return w;
}

NeuralModel zeros_like(const NeuralModel& m) {
    NeuralModel g = m;
    auto zero = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
    for (auto& l : g.dense) {
        zero(l.w.data);
        zero(l.b);
    }
    for (auto& l : g.conv) {
        zero(l.w);
        zero(l.b);
    }
    for (auto& l : g.rec) {
        zero(l.wx.data);
        zero(l.wh.data);
        zero(l.b);
    }
    zero(g.head.w.data);
    zero(g.head.b);
    return g;
}

template <class F>
void for_each_tensor(NeuralModel& m, NeuralModel& g, F f) {
    for (std::size_t i = 0; i < m.dense.size(); ++i) {
        f(m.dense[i].w.data, g.dense[i].w.data);
        f(m.dense[i].b, g.dense[i].b);
    }
    for (std::size_t i = 0; i < m.conv.size(); ++i) {
        f(m.conv[i].w, g.conv[i].w);
        f(m.conv[i].b, g.conv[i].b);
    }
    for (std::size_t i = 0; i < m.rec.size(); ++i) {
        f(m.rec[i].wx.data, g.rec[i].wx.data);
        f(m.rec[i].wh.data, g.rec[i].wh.data);
        f(m.rec[i].b, g.rec[i].b);
    }
    f(m.head.w.data, g.head.w.data);
    f(m.head.b, g.head.b);
}

}  // namespace

std::string to_string(NeuralKind kind) {
    switch (kind) {
        case NeuralKind::mlp: return "mlp";
        case NeuralKind::cnn1d: return "cnn1d";
        case NeuralKind::rnn: return "rnn";
    }
    return "?";
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    const double zmax = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (double& v : p) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

std::vector<double> NeuralModel::logits(std::span<const double> x) const {
    Workspace ws;
    forward(*this, x, ws);
    return ws.logits;
}

std::vector<double> NeuralModel::predict_proba(std::span<const double> x) const {
    return softmax(logits(x));
}

Matrix NeuralModel::grad_logits(std::span<const double> x) const {
    Workspace ws;
    forward(*this, x, ws);
    Matrix jac(out_classes, input_dim, 0.0);
    std::vector<double> dlogits(out_classes, 0.0);
    for (std::size_t c = 0; c < out_classes; ++c) {
        std::fill(dlogits.begin(), dlogits.end(), 0.0);
        dlogits[c] = 1.0;
        backward(*this, x, ws, dlogits, nullptr, jac.row(c));
    }
    return jac;
}

std::vector<double> NeuralModel::grad_loss(std::span<const double> x, int label) const {
    if (label < 0 || static_cast<std::size_t>(label) >= out_classes)
        throw tb_error("grad_loss: label out of range");
    Workspace ws;
    forward(*this, x, ws);
    std::vector<double> dlogits = softmax(ws.logits);
    dlogits[static_cast<std::size_t>(label)] -= 1.0;
    std::vector<double> dx(input_dim, 0.0);
    backward(*this, x, ws, dlogits, nullptr, dx);
    return dx;
}

NeuralModel init_neural(NeuralKind kind, std::size_t input_dim, std::size_t n_classes,
                        std::uint64_t seed) {
    if (input_dim < 1 || n_classes < 2) throw tb_error("init_neural: bad dimensions");
    NeuralModel m;
    m.kind = kind;
    m.input_dim = input_dim;
    m.out_classes = n_classes;
    Rng rng(mix_seed(seed, kInitSalt));

    auto dense_layer = [&](std::size_t out, std::size_t in) {
        DenseLayer l;
        l.w = glorot(out, in, in, out, rng);
        l.b.assign(out, 0.0);
        return l;
    };
    switch (kind) {
        case NeuralKind::mlp: {
            m.dense.push_back(dense_layer(180, input_dim));
            m.dense.push_back(dense_layer(160, 180));
            m.head = dense_layer(n_classes, 160);
            break;
        }
        case NeuralKind::cnn1d: {
            constexpr std::size_t kernel = 3;
            if (input_dim < kernel)
                throw tb_error("cnn1d: input dimension is smaller than the kernel size");
            auto conv_layer = [&](std::size_t out_ch, std::size_t in_ch) {
                ConvLayer l;
                l.out_ch = out_ch;
                l.in_ch = in_ch;
                l.kernel = kernel;
                const double a = std::sqrt(6.0 / static_cast<double>((in_ch + out_ch) * kernel));
                l.w.resize(out_ch * in_ch * kernel);
                for (double& v : l.w) v = rng.uniform(-a, a);
                l.b.assign(out_ch, 0.0);
                return l;
            };
            m.conv.push_back(conv_layer(84, 1));
            m.conv.push_back(conv_layer(64, 84));
            m.head = dense_layer(n_classes, 64 * input_dim);
            break;
        }
        case NeuralKind::rnn: {
            auto rec_layer = [&](std::size_t hid, std::size_t in) {
                RecurrentLayer l;
                l.wx = glorot(hid, in, in, hid, rng);
                l.wh = glorot(hid, hid, hid, hid, rng);
                l.b.assign(hid, 0.0);
                return l;
            };
            m.rec.push_back(rec_layer(84, 1));
            m.rec.push_back(rec_layer(64, 84));
            m.head = dense_layer(n_classes, 64);
            break;
        }
    }
    return m;
}

void train_neural_inplace(NeuralModel& model, const Matrix& x, const std::vector<int>& y,
                          const TrainConfig& cfg, TrainTrace* trace) {
    if (x.rows == 0 || x.rows != y.size()) throw tb_error("train_neural: bad training data");
    if (x.cols != model.input_dim) throw tb_error("train_neural: feature dimension mismatch");
    if (cfg.batch_size < 1) throw tb_error("train_neural: batch_size must be >= 1");
    if (!(cfg.learning_rate > 0)) throw tb_error("train_neural: learning_rate must be > 0");

    Rng shuffle_rng(mix_seed(cfg.seed, kShuffleSalt));
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    NeuralModel grads = zeros_like(model);
    Workspace ws;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            const std::size_t bn = end - start;
            for_each_tensor(grads, grads, [](std::vector<double>& g, std::vector<double>&) {
                std::fill(g.begin(), g.end(), 0.0);
            });
            double batch_loss = 0.0;
            for (std::size_t s = start; s < end; ++s) {
                const auto row = x.row(order[s]);
                forward(model, row, ws);
                std::vector<double> p = softmax(ws.logits);
                const auto label = static_cast<std::size_t>(y[order[s]]);
                batch_loss += -std::log(std::max(p[label], 1e-300));
                p[label] -= 1.0;
                backward(model, row, ws, p, &grads, {});
            }
            if (!std::isfinite(batch_loss))
                throw tb_error("train_neural: non-finite loss at epoch " +
                               std::to_string(epoch) + ", batch " + std::to_string(batch_no));
            const double scale = cfg.learning_rate / static_cast<double>(bn);
            for_each_tensor(model, grads, [scale](std::vector<double>& w, std::vector<double>& g) {
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= scale * g[i];
            });
            epoch_loss += batch_loss;
        }
        if (trace) trace->epoch_loss.push_back(epoch_loss / static_cast<double>(x.rows));
    }
}

NeuralModel train_neural(const Dataset& train, NeuralKind kind, const TrainConfig& cfg,
                         TrainTrace* trace) {
    NeuralModel model = init_neural(kind, train.n_features(), train.n_classes(), cfg.seed);
    train_neural_inplace(model, train.features, train.labels, cfg, trace);
    return model;
}

}  // namespace tb
