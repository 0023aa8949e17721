#ifndef DERAIN_OPTIMIZER_HPP
#define DERAIN_OPTIMIZER_HPP

#include <cmath>
#include <string>
#include <vector>

#include "derain/checkpoint.hpp"
#include "derain/tensor.hpp"

namespace derain {

/// Named reference to one trainable tensor; built once per network via
/// visit_params and reused for optimization and checkpointing.
template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* tensor;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

template <typename T, typename Net>
ParamList<T> collect_params(Net& net, const std::string& prefix) {
    ParamList<T> out;
    net.visit_params([&](const std::string& name, Tensor<T>& t) { out.push_back({name, &t}); }, prefix);
    return out;
}

/// Adam with per-tensor first/second moments, aligned with a fixed ParamList.
template <typename T>
class Adam {
  public:
    double lr = 2e-4, beta1 = 0.5, beta2 = 0.999, eps = 1e-8;

    void init(const ParamList<T>& params) {
        m_.clear();
        v_.clear();
        for (const auto& p : params) {
            m_.push_back(Tensor<T>::zeros(p.tensor->c, p.tensor->h, p.tensor->w));
            v_.push_back(Tensor<T>::zeros(p.tensor->c, p.tensor->h, p.tensor->w));
        }
        t_ = 0;
    }

    /// One update; grads[i] may be null (parameter untouched this step).
    void step(const ParamList<T>& params, const std::vector<const Tensor<T>*>& grads) {
        ++t_;
        const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(beta1, static_cast<double>(t_))));
        const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(beta2, static_cast<double>(t_))));
        const T b1 = static_cast<T>(beta1), b2 = static_cast<T>(beta2);
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!grads[i]) continue;
            const auto& g = grads[i]->v;
            m_[i].v = b1 * m_[i].v + (T(1) - b1) * g;
            v_[i].v = b2 * v_[i].v + (T(1) - b2) * g * g;
            params[i].tensor->v -=
                static_cast<T>(lr) * (m_[i].v * c1) / ((v_[i].v * c2).sqrt() + static_cast<T>(eps));
        }
    }

    long steps_taken() const { return t_; }

    void save(Checkpoint& ck, const ParamList<T>& params, const std::string& prefix) const {
        for (std::size_t i = 0; i < params.size(); ++i) {
            ck.put(prefix + ".m." + params[i].name, m_[i]);
            ck.put(prefix + ".v." + params[i].name, v_[i]);
        }
        Tensor<T> t = Tensor<T>::scalar(static_cast<T>(t_));
        ck.put(prefix + ".t", t);
    }

    void load(const Checkpoint& ck, const ParamList<T>& params, const std::string& prefix) {
        init(params);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = ck.get<T>(prefix + ".m." + params[i].name);
            v_[i] = ck.get<T>(prefix + ".v." + params[i].name);
            require_same_shape(m_[i], *params[i].tensor, "optimizer load");
        }
        t_ = static_cast<long>(ck.get<T>(prefix + ".t").v[0]);
    }

  private:
    std::vector<Tensor<T>> m_, v_;
    long t_ = 0;
};

}  // namespace derain

#endif
