#pragma once

// Small double-precision conv net with hand-written backprop and Adam.
// Layers cache what their backward pass needs; no external dependencies.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rslaq/rng.hpp"
#include "rslaq/telemetry.hpp"

namespace rslaq {

struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;
    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(std::size_t(n_) * c_ * h_ * w_, 0.0) {}
    double& at(int i, int j, int y, int x) {
        return v[((std::size_t(i) * c + j) * h + y) * w + x];
    }
    double at(int i, int j, int y, int x) const {
        return v[((std::size_t(i) * c + j) * h + y) * w + x];
    }
    int count() const { return int(v.size()); }
};

struct ParamView {
    std::string name;
    double* data = nullptr;
    double* grad = nullptr;
    int size = 0;
};

class Conv2d {  // 3x3 kernels, stride 1, zero padding 1
  public:
    std::vector<double> w, b, dw, db;
    int in_c, out_c;

    Conv2d(int in_channels, int out_channels, Rng& rng)
        : in_c(in_channels), out_c(out_channels) {
        w.resize(std::size_t(out_c) * in_c * 9);
        b.assign(out_c, 0.0);
        double limit = std::sqrt(6.0 / (in_c * 9.0 + out_c * 9.0));
        for (auto& x : w) x = (2.0 * rng.uniform() - 1.0) * limit;
        dw.assign(w.size(), 0.0);
        db.assign(b.size(), 0.0);
    }

    Tensor forward(const Tensor& x) {
        x_ = x;
        Tensor y(x.n, out_c, x.h, x.w);
        for (int n = 0; n < x.n; ++n)
            for (int o = 0; o < out_c; ++o)
                for (int yy = 0; yy < x.h; ++yy)
                    for (int xx = 0; xx < x.w; ++xx) {
                        double acc = b[o];
                        for (int i = 0; i < in_c; ++i)
                            for (int ky = 0; ky < 3; ++ky) {
                                int sy = yy + ky - 1;
                                if (sy < 0 || sy >= x.h) continue;
                                for (int kx = 0; kx < 3; ++kx) {
                                    int sx = xx + kx - 1;
                                    if (sx < 0 || sx >= x.w) continue;
                                    acc += kernel(o, i, ky, kx) * x.at(n, i, sy, sx);
                                }
                            }
                        y.at(n, o, yy, xx) = acc;
                    }
        return y;
    }

    Tensor backward(const Tensor& dy) {
        Tensor dx(x_.n, in_c, x_.h, x_.w);
        for (int n = 0; n < x_.n; ++n)
            for (int o = 0; o < out_c; ++o)
                for (int yy = 0; yy < x_.h; ++yy)
                    for (int xx = 0; xx < x_.w; ++xx) {
                        double g = dy.at(n, o, yy, xx);
                        db[o] += g;
                        for (int i = 0; i < in_c; ++i)
                            for (int ky = 0; ky < 3; ++ky) {
                                int sy = yy + ky - 1;
                                if (sy < 0 || sy >= x_.h) continue;
                                for (int kx = 0; kx < 3; ++kx) {
                                    int sx = xx + kx - 1;
                                    if (sx < 0 || sx >= x_.w) continue;
                                    dkernel(o, i, ky, kx) += g * x_.at(n, i, sy, sx);
                                    dx.at(n, i, sy, sx) += g * kernel(o, i, ky, kx);
                                }
                            }
                    }
        return dx;
    }

  private:
    double& kernel(int o, int i, int ky, int kx) {
        return w[((std::size_t(o) * in_c + i) * 3 + ky) * 3 + kx];
    }
    double& dkernel(int o, int i, int ky, int kx) {
        return dw[((std::size_t(o) * in_c + i) * 3 + ky) * 3 + kx];
    }
    Tensor x_;
};

class BatchNorm2d {
  public:
    std::vector<double> gamma, beta, running_mean, running_var, dgamma, dbeta;
    double eps = 1e-5;
    double momentum = 0.1;

    explicit BatchNorm2d(int channels)
        : gamma(channels, 1.0),
          beta(channels, 0.0),
          running_mean(channels, 0.0),
          running_var(channels, 1.0),
          dgamma(channels, 0.0),
          dbeta(channels, 0.0) {}

    Tensor forward(const Tensor& x, bool use_batch_stats, bool update_running) {
        int c = int(gamma.size());
        batch_mode_ = use_batch_stats;
        xhat_ = Tensor(x.n, x.c, x.h, x.w);
        invstd_.assign(c, 0.0);
        Tensor y(x.n, x.c, x.h, x.w);
        int m = x.n * x.h * x.w;
        for (int j = 0; j < c; ++j) {
            double mean, var;
            if (use_batch_stats) {
                mean = 0.0;
                for (int n = 0; n < x.n; ++n)
                    for (int yy = 0; yy < x.h; ++yy)
                        for (int xx = 0; xx < x.w; ++xx) mean += x.at(n, j, yy, xx);
                mean /= m;
                var = 0.0;
                for (int n = 0; n < x.n; ++n)
                    for (int yy = 0; yy < x.h; ++yy)
                        for (int xx = 0; xx < x.w; ++xx) {
                            double d = x.at(n, j, yy, xx) - mean;
                            var += d * d;
                        }
                var /= m;
                if (update_running) {
                    double unbiased = m > 1 ? var * m / (m - 1.0) : var;
                    running_mean[j] = (1 - momentum) * running_mean[j] + momentum * mean;
                    running_var[j] = (1 - momentum) * running_var[j] + momentum * unbiased;
                }
            } else {
                mean = running_mean[j];
                var = running_var[j];
            }
            double inv = 1.0 / std::sqrt(var + eps);
            invstd_[j] = inv;
            for (int n = 0; n < x.n; ++n)
                for (int yy = 0; yy < x.h; ++yy)
                    for (int xx = 0; xx < x.w; ++xx) {
                        double xh = (x.at(n, j, yy, xx) - mean) * inv;
                        xhat_.at(n, j, yy, xx) = xh;
                        y.at(n, j, yy, xx) = gamma[j] * xh + beta[j];
                    }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) {
        int c = int(gamma.size());
        Tensor dx(dy.n, dy.c, dy.h, dy.w);
        int m = dy.n * dy.h * dy.w;
        for (int j = 0; j < c; ++j) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int n = 0; n < dy.n; ++n)
                for (int yy = 0; yy < dy.h; ++yy)
                    for (int xx = 0; xx < dy.w; ++xx) {
                        double g = dy.at(n, j, yy, xx);
                        sum_dy += g;
                        sum_dy_xhat += g * xhat_.at(n, j, yy, xx);
                    }
            dbeta[j] += sum_dy;
            dgamma[j] += sum_dy_xhat;
            for (int n = 0; n < dy.n; ++n)
                for (int yy = 0; yy < dy.h; ++yy)
                    for (int xx = 0; xx < dy.w; ++xx) {
                        double g = dy.at(n, j, yy, xx);
                        if (batch_mode_) {
                            dx.at(n, j, yy, xx) =
                                gamma[j] * invstd_[j] *
                                (g - sum_dy / m -
                                 xhat_.at(n, j, yy, xx) * sum_dy_xhat / m);
                        } else {
                            dx.at(n, j, yy, xx) = gamma[j] * invstd_[j] * g;
                        }
                    }
        }
        return dx;
    }

  private:
    Tensor xhat_;
    std::vector<double> invstd_;
    bool batch_mode_ = true;
};

class TanhLayer {
  public:
    Tensor forward(const Tensor& x) {
        y_ = Tensor(x.n, x.c, x.h, x.w);
        for (std::size_t i = 0; i < x.v.size(); ++i) y_.v[i] = std::tanh(x.v[i]);
        return y_;
    }
    Tensor backward(const Tensor& dy) {
        Tensor dx(dy.n, dy.c, dy.h, dy.w);
        for (std::size_t i = 0; i < dy.v.size(); ++i)
            dx.v[i] = dy.v[i] * (1.0 - y_.v[i] * y_.v[i]);
        return dx;
    }

  private:
    Tensor y_;
};

class Dense {  // input is flattened c*h*w features
  public:
    std::vector<double> w, b, dw, db;
    int in_f, out_f;

    Dense(int in_features, int out_features, Rng& rng)
        : in_f(in_features), out_f(out_features) {
        w.resize(std::size_t(out_f) * in_f);
        b.assign(out_f, 0.0);
        double limit = std::sqrt(6.0 / (in_f + double(out_f)));
        for (auto& x : w) x = (2.0 * rng.uniform() - 1.0) * limit;
        dw.assign(w.size(), 0.0);
        db.assign(b.size(), 0.0);
    }

    Tensor forward(const Tensor& x) {
        if (x.c * x.h * x.w != in_f)
            throw std::invalid_argument("dense input feature mismatch");
        x_ = x;
        Tensor y(x.n, out_f, 1, 1);
        for (int n = 0; n < x.n; ++n)
            for (int o = 0; o < out_f; ++o) {
                double acc = b[o];
                const double* row = &w[std::size_t(o) * in_f];
                const double* xin = &x.v[std::size_t(n) * in_f];
                for (int i = 0; i < in_f; ++i) acc += row[i] * xin[i];
                y.at(n, o, 0, 0) = acc;
            }
        return y;
    }

    Tensor backward(const Tensor& dy) {
        Tensor dx(x_.n, x_.c, x_.h, x_.w);
        for (int n = 0; n < x_.n; ++n) {
            const double* xin = &x_.v[std::size_t(n) * in_f];
            double* dxin = &dx.v[std::size_t(n) * in_f];
            for (int o = 0; o < out_f; ++o) {
                double g = dy.at(n, o, 0, 0);
                db[o] += g;
                double* drow = &dw[std::size_t(o) * in_f];
                const double* row = &w[std::size_t(o) * in_f];
                for (int i = 0; i < in_f; ++i) {
                    drow[i] += g * xin[i];
                    dxin[i] += g * row[i];
                }
            }
        }
        return dx;
    }

  private:
    Tensor x_;
};

class Adam {
  public:
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void resize(int n) {
        m_.assign(n, 0.0);
        v_.assign(n, 0.0);
        t_ = 0;
    }

    void step(double* theta, const double* grad, int n, double lr) {
        ++t_;
        double c1 = 1.0 - std::pow(beta1, t_);
        double c2 = 1.0 - std::pow(beta2, t_);
        for (int i = 0; i < n; ++i) {
            m_[i] = beta1 * m_[i] + (1 - beta1) * grad[i];
            v_[i] = beta2 * v_[i] + (1 - beta2) * grad[i] * grad[i];
            theta[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
        }
    }

  private:
    std::vector<double> m_, v_;
    long t_ = 0;
};

// Observation encoder: conv stack over the 4x(J+1) matrix, dense head with
// one output per action.
class QNetwork {
  public:
    QNetwork(int num_slices, int num_actions, std::uint64_t seed)
        : J_(num_slices),
          actions_(num_actions),
          rng_(seed),
          conv1_(1, 16, rng_),
          bn1_(16),
          conv2_(16, 32, rng_),
          bn2_(32),
          conv3_(32, 32, rng_),
          bn3_(32),
          conv4_(32, 64, rng_),
          bn4_(64),
          dense_(64 * 4 * (num_slices + 1), num_actions, rng_) {
        if (num_slices < 1 || num_actions < 1)
            throw std::invalid_argument("bad network dimensions");
        auto views = params();
        adam_.resize(int(views.size()));
        for (std::size_t i = 0; i < views.size(); ++i) adam_[i].resize(views[i].size);
    }

    int num_actions() const { return actions_; }
    int num_slices() const { return J_; }

    std::vector<ParamView> params() {
        std::vector<ParamView> out;
        auto add = [&](const std::string& name, std::vector<double>& d,
                       std::vector<double>& g) {
            out.push_back({name, d.data(), g.data(), int(d.size())});
        };
        add("conv1.w", conv1_.w, conv1_.dw);
        add("conv1.b", conv1_.b, conv1_.db);
        add("bn1.gamma", bn1_.gamma, bn1_.dgamma);
        add("bn1.beta", bn1_.beta, bn1_.dbeta);
        add("conv2.w", conv2_.w, conv2_.dw);
        add("conv2.b", conv2_.b, conv2_.db);
        add("bn2.gamma", bn2_.gamma, bn2_.dgamma);
        add("bn2.beta", bn2_.beta, bn2_.dbeta);
        add("conv3.w", conv3_.w, conv3_.dw);
        add("conv3.b", conv3_.b, conv3_.db);
        add("bn3.gamma", bn3_.gamma, bn3_.dgamma);
        add("bn3.beta", bn3_.beta, bn3_.dbeta);
        add("conv4.w", conv4_.w, conv4_.dw);
        add("conv4.b", conv4_.b, conv4_.db);
        add("bn4.gamma", bn4_.gamma, bn4_.dgamma);
        add("bn4.beta", bn4_.beta, bn4_.dbeta);
        add("dense.w", dense_.w, dense_.dw);
        add("dense.b", dense_.b, dense_.db);
        return out;
    }

    std::vector<std::vector<double>*> state_vectors() {
        return {&bn1_.running_mean, &bn1_.running_var, &bn2_.running_mean,
                &bn2_.running_var, &bn3_.running_mean, &bn3_.running_var,
                &bn4_.running_mean, &bn4_.running_var};
    }

    void zero_grads() {
        for (auto& v : params()) std::fill(v.grad, v.grad + v.size, 0.0);
    }

    Tensor encode(const std::vector<NetworkState>& states) const {
        Tensor x(int(states.size()), 1, 4, J_ + 1);
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (states[i].num_slices != J_ || int(states[i].m.size()) != 4 * (J_ + 1))
                throw std::invalid_argument("state shape mismatch");
            std::copy(states[i].m.begin(), states[i].m.end(),
                      x.v.begin() + std::ptrdiff_t(i) * 4 * (J_ + 1));
        }
        return x;
    }

    Tensor forward(const Tensor& x, bool batch_stats, bool update_running) {
        Tensor t = conv1_.forward(x);
        t = bn1_.forward(t, batch_stats, update_running);
        t = tanh1_.forward(t);
        t = conv2_.forward(t);
        t = bn2_.forward(t, batch_stats, update_running);
        t = tanh2_.forward(t);
        t = conv3_.forward(t);
        t = bn3_.forward(t, batch_stats, update_running);
        t = tanh3_.forward(t);
        t = conv4_.forward(t);
        t = bn4_.forward(t, batch_stats, update_running);
        t = tanh4_.forward(t);
        return dense_.forward(t);
    }

    std::vector<double> predict(const NetworkState& state) {
        Tensor q = forward(encode({state}), false, false);
        return q.v;
    }

    std::vector<std::vector<double>> predict_batch(const std::vector<NetworkState>& states) {
        Tensor q = forward(encode(states), false, false);
        std::vector<std::vector<double>> out(states.size());
        for (std::size_t i = 0; i < states.size(); ++i)
            out[i].assign(q.v.begin() + std::ptrdiff_t(i) * actions_,
                          q.v.begin() + std::ptrdiff_t(i + 1) * actions_);
        return out;
    }

    double forward_loss(const std::vector<NetworkState>& states,
                        const std::vector<int>& actions,
                        const std::vector<double>& targets, bool batch_stats,
                        bool update_running) {
        if (states.empty() || states.size() != actions.size() ||
            states.size() != targets.size())
            throw std::invalid_argument("batch arity mismatch");
        q_ = forward(encode(states), batch_stats, update_running);
        loss_actions_ = actions;
        loss_targets_ = targets;
        double loss = 0.0;
        for (std::size_t i = 0; i < actions.size(); ++i) {
            if (actions[i] < 0 || actions[i] >= actions_)
                throw std::invalid_argument("action id out of range");
            double d = q_.at(int(i), actions[i], 0, 0) - targets[i];
            loss += d * d;
        }
        return loss / double(actions.size());
    }

    void backward() {
        Tensor dq(q_.n, q_.c, q_.h, q_.w);
        for (std::size_t i = 0; i < loss_actions_.size(); ++i)
            dq.at(int(i), loss_actions_[i], 0, 0) =
                2.0 * (q_.at(int(i), loss_actions_[i], 0, 0) - loss_targets_[i]) /
                double(loss_actions_.size());
        Tensor t = dense_.backward(dq);
        t = tanh4_.backward(t);
        t = bn4_.backward(t);
        t = conv4_.backward(t);
        t = tanh3_.backward(t);
        t = bn3_.backward(t);
        t = conv3_.backward(t);
        t = tanh2_.backward(t);
        t = bn2_.backward(t);
        t = conv2_.backward(t);
        t = tanh1_.backward(t);
        t = bn1_.backward(t);
        conv1_.backward(t);
    }

    double fit(const std::vector<NetworkState>& states, const std::vector<int>& actions,
               const std::vector<double>& targets, double lr) {
        zero_grads();
        double loss = forward_loss(states, actions, targets, true, true);
        backward();
        auto views = params();
        for (std::size_t i = 0; i < views.size(); ++i)
            adam_[i].step(views[i].data, views[i].grad, views[i].size, lr);
        return loss;
    }

    void copy_from(QNetwork& other) {
        if (other.J_ != J_ || other.actions_ != actions_)
            throw std::invalid_argument("network shape mismatch");
        auto mine = params();
        auto theirs = other.params();
        for (std::size_t i = 0; i < mine.size(); ++i)
            std::copy(theirs[i].data, theirs[i].data + theirs[i].size, mine[i].data);
        auto ms = state_vectors();
        auto ts = other.state_vectors();
        for (std::size_t i = 0; i < ms.size(); ++i) *ms[i] = *ts[i];
    }

    void save(std::ostream& os) {
        os << "rslaq-qnet 1\n";
        os << "slices " << J_ << " actions " << actions_ << "\n";
        os << std::hexfloat;
        auto views = params();
        for (auto& v : views) {
            os << "param " << v.name << ' ' << v.size << '\n';
            for (int i = 0; i < v.size; ++i) os << v.data[i] << '\n';
        }
        auto st = state_vectors();
        for (std::size_t k = 0; k < st.size(); ++k) {
            os << "state " << k << ' ' << st[k]->size() << '\n';
            for (double d : *st[k]) os << d << '\n';
        }
        os << "end\n";
        os << std::defaultfloat;
    }

    void load(std::istream& is) {
        std::string magic;
        int version = 0;
        is >> magic >> version;
        if (magic != "rslaq-qnet" || version != 1)
            throw std::runtime_error("not a checkpoint file");
        std::string key;
        int j = 0, a = 0;
        is >> key >> j;
        std::string key2;
        is >> key2 >> a;
        if (key != "slices" || key2 != "actions")
            throw std::runtime_error("malformed checkpoint header");
        if (j != J_ || a != actions_)
            throw std::runtime_error("checkpoint shape mismatch");
        auto read_values = [&](double* dst, int n) {
            std::string tok;
            for (int i = 0; i < n; ++i) {
                if (!(is >> tok)) throw std::runtime_error("truncated checkpoint");
                char* end = nullptr;
                dst[i] = std::strtod(tok.c_str(), &end);
                if (end == tok.c_str())
                    throw std::runtime_error("bad number in checkpoint");
            }
        };
        auto views = params();
        for (auto& v : views) {
            std::string tag, name;
            int size = 0;
            if (!(is >> tag >> name >> size) || tag != "param" || name != v.name ||
                size != v.size)
                throw std::runtime_error("unexpected checkpoint section");
            read_values(v.data, v.size);
        }
        auto st = state_vectors();
        for (std::size_t k = 0; k < st.size(); ++k) {
            std::string tag;
            std::size_t idx = 0, size = 0;
            if (!(is >> tag >> idx >> size) || tag != "state" || idx != k ||
                size != st[k]->size())
                throw std::runtime_error("unexpected checkpoint section");
            read_values(st[k]->data(), int(size));
        }
        std::string tail;
        if (!(is >> tail) || tail != "end")
            throw std::runtime_error("truncated checkpoint");
    }

  private:
    int J_, actions_;
    Rng rng_;
    Conv2d conv1_;
    BatchNorm2d bn1_;
    Conv2d conv2_;
    BatchNorm2d bn2_;
    Conv2d conv3_;
    BatchNorm2d bn3_;
    Conv2d conv4_;
    BatchNorm2d bn4_;
    Dense dense_;
    TanhLayer tanh1_, tanh2_, tanh3_, tanh4_;
    std::vector<Adam> adam_;
    Tensor q_;
    std::vector<int> loss_actions_;
    std::vector<double> loss_targets_;
};

}  // namespace rslaq
