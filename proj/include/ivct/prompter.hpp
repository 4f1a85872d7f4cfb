#pragma once

// View-aware prompting: a two-layer perceptron trunk over the sampling vector
// with one linear head per stage (both pathways own a private prompter), plus
// a single-channel head gating the output residual.

#include "ivct/nn.hpp"
#include "ivct/sampling.hpp"

namespace ivct::nn {

template <typename T>
struct StagePrompts {
    std::vector<Tensor<T>> stage; // one [C_stage] vector per stage
    Tensor<T> output_gate;        // [1], gates the residual head
};

template <typename T>
struct ViewPrompter {
    int64_t n_full = 0;
    Linear<T> fc1, fc2;           // n_full -> 128 -> 64
    std::vector<Linear<T>> heads; // 64 -> C_stage
    Linear<T> out_head;           // 64 -> 1

    static ViewPrompter make(int64_t n_full, const std::vector<int64_t>& stage_dims, RngState& rng,
                             int64_t trunk_hidden = 128, int64_t trunk_out = 64) {
        ViewPrompter p;
        p.n_full = n_full;
        p.fc1 = Linear<T>::make(n_full, trunk_hidden, rng);
        p.fc2 = Linear<T>::make(trunk_hidden, trunk_out, rng);
        for (int64_t c : stage_dims) p.heads.push_back(Linear<T>::make(trunk_out, c, rng));
        p.out_head = Linear<T>::make(trunk_out, 1, rng);
        return p;
    }

    StagePrompts<T> encode(const SamplingVector& v) const {
        if (v.size() != n_full)
            throw std::invalid_argument("encode_prompts: sampling vector length " + std::to_string(v.size()) +
                                        " != " + std::to_string(n_full));
        std::vector<T> bits(static_cast<size_t>(n_full));
        for (int64_t i = 0; i < n_full; ++i) bits[static_cast<size_t>(i)] = v.bits[static_cast<size_t>(i)] ? T(1) : T(0);
        auto x = Tensor<T>::from_data({1, n_full}, std::move(bits));
        auto h = relu(fc2(relu(fc1(x))));
        StagePrompts<T> out;
        out.stage.reserve(heads.size());
        for (const auto& head : heads) out.stage.push_back(reshape(head(h), {head.weight.dim(0)}));
        out.output_gate = reshape(out_head(h), {1});
        return out;
    }

    void params(const std::string& p, ParamMap<T>& m) const {
        fc1.params(p + ".fc1", m);
        fc2.params(p + ".fc2", m);
        for (size_t i = 0; i < heads.size(); ++i) heads[i].params(p + ".head" + std::to_string(i), m);
        out_head.params(p + ".out_head", m);
    }
};

// H + p (x) f(H): broadcasting channel-wise prompt modulation
template <typename T, typename F>
Tensor<T> modulate(Tensor<T> h, Tensor<T> p, F&& f) {
    return add(h, mul_channel(f(h), p));
}

} // namespace ivct::nn
