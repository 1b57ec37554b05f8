// Copyright (c) 2026 cosal contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <random>

#include "cosal/network/backbone.hpp"
#include "cosal/network/fusion.hpp"
#include "cosal/network/guidance.hpp"
#include "cosal/network/heads.hpp"

namespace cosal {

/// Structural switches. Defaults are the full model; the documented subsets
/// reproduce the ablation rows:
///   (a) baseline        : all off (backbone + transitions + projection + final head)
///   (b) + context       : use_ggm
///   (c) + edge          : (b) + use_edge
///   (d) + coarse sal    : (c) + use_coarse_sal (supervision only)
///   (e) + SA/CA pair    : (d) + use_mutual_sa_ca (attention applied + depth stage)
///   (f) + collector     : (e) + use_kc + all three kc_use_att_* flags
struct AblationToggles {
  bool use_ggm = true;
  bool use_edge = true;
  bool use_coarse_sal = true;
  bool use_mutual_sa_ca = true;
  bool use_kc = true;
  bool kc_use_att_edge = true;
  bool kc_use_att_sal = true;
  bool kc_use_att_depth = true;

  static AblationToggles none() {
    return AblationToggles{false, false, false, false, false, false, false, false};
  }

  bool has_saliency_head() const { return use_coarse_sal || use_mutual_sa_ca; }

  void validate() const {
    check<ConfigError>(!(kc_use_att_edge || kc_use_att_sal || kc_use_att_depth) || use_kc,
                       "toggles: kc_use_att_* requires use_kc");
    check<ConfigError>(!kc_use_att_edge || use_edge,
                       "toggles: kc_use_att_edge requires use_edge");
    check<ConfigError>(!kc_use_att_sal || has_saliency_head(),
                       "toggles: kc_use_att_sal requires a saliency head "
                       "(use_coarse_sal or use_mutual_sa_ca)");
    check<ConfigError>(!kc_use_att_depth || use_mutual_sa_ca,
                       "toggles: kc_use_att_depth requires use_mutual_sa_ca");
  }
};

struct NetworkConfig {
  BackboneConfig backbone;
  AblationToggles toggles;

  static NetworkConfig full(int input_side = 256) {
    NetworkConfig cfg;
    cfg.backbone = BackboneConfig::full(input_side);
    return cfg;
  }
  static NetworkConfig tiny(int input_side = 64) {
    NetworkConfig cfg;
    cfg.backbone = BackboneConfig::tiny(input_side);
    return cfg;
  }

  void validate() const {
    backbone.validate();
    toggles.validate();
  }
};

/// Everything the forward pass exposes. Maps that a given ablation does not
/// produce are left undefined. s_final is always defined; att_depth doubles
/// as the depth prediction supervised by the regression loss.
template <typename T>
struct NetworkOutputs {
  Variable<T> s_final;                 // [N,1,S,S] in [0,1]
  Variable<T> m_edge, att_edge;        // edge probability / logit
  Variable<T> s_coarse, att_sal;       // coarse saliency probability / logit
  Variable<T> att_depth;               // depth regression map
  Variable<T> m_c;                     // [N,64,1,1] channel weights
  Variable<T> att_f;                   // fused collector attention
  // Intermediate features, retained for shape and equation tests.
  Variable<T> f_low, f_high, f_h_tilde, f_hc, f_g, f_g_tilde, f_fused;
};

template <typename T>
class SaliencyNetwork : public Module<T> {
 public:
  SaliencyNetwork(std::mt19937_64& rng, const NetworkConfig& cfg)
      : cfg_(cfg), backbone_(rng, cfg.backbone) {
    cfg.validate();
    this->register_child("backbone", backbone_);
    transitions_.emplace(rng, cfg.backbone.channel_widths);
    this->register_child("transitions", *transitions_);
    guidance_.emplace(rng, cfg.toggles.use_ggm);
    this->register_child("guidance", *guidance_);
    if (cfg.toggles.use_edge) {
      edge_head_.emplace(rng, 64);
      this->register_child("edge_head", *edge_head_);
    }
    if (cfg.toggles.has_saliency_head()) {
      sal_head_.emplace(rng, 64);
      this->register_child("sal_head", *sal_head_);
    }
    if (cfg.toggles.use_mutual_sa_ca) {
      depth_head_.emplace(rng, 64);
      this->register_child("depth_head", *depth_head_);
    }
    if (cfg.toggles.use_kc) {
      fusion_.emplace(rng, cfg.toggles.kc_use_att_edge, cfg.toggles.kc_use_att_sal,
                      cfg.toggles.kc_use_att_depth);
      this->register_child("collector", *fusion_);
    }
    final_conv_.emplace(rng, 128, 2, 1, ConvSpec{1, 0, 1}, true);
    this->register_child("final_conv", *final_conv_);
  }

  const NetworkConfig& config() const { return cfg_; }
  GlobalGuidance<T>& guidance() { return *guidance_; }

  NetworkOutputs<T> forward(const Variable<T>& image) {
    NetworkOutputs<T> out;
    auto side = backbone_.forward(image);
    auto trans = transitions_->forward(side);
    out.f_low = trans.f_low;
    auto guided = guidance_->forward(trans.t3, trans.t4, trans.t5);
    out.f_high = guided.f_high;

    if (edge_head_) {
      auto e = edge_head_->forward(out.f_low);
      out.att_edge = e.att;
      out.m_edge = e.prob;
    }

    Variable<T> high = out.f_high;
    if (sal_head_) {
      auto s = sal_head_->forward(out.f_high);
      out.att_sal = s.att;
      out.s_coarse = s.prob;
    }
    if (depth_head_) {
      out.f_h_tilde = sal_head_->apply(out.f_high, out.att_sal);
      auto d = depth_head_->forward(out.f_h_tilde);
      out.att_depth = d.att_depth;
      out.m_c = d.m_c;
      out.f_hc = d.f_hc;
      high = out.f_hc;
    }

    out.f_g = concat_channels<T>({out.f_low, high});
    Variable<T> fused = out.f_g;
    if (fusion_) {
      auto k = fusion_->forward(out.f_g, out.att_edge, out.att_sal, out.att_depth);
      out.att_f = k.att_f;
      out.f_g_tilde = k.f_g_tilde;
      out.f_fused = k.fused;
      fused = k.fused;
    }
    auto logits = final_conv_->forward(fused);
    out.s_final = select_channel(softmax_channels(logits), 1);
    return out;
  }

 private:
  NetworkConfig cfg_;
  Backbone<T> backbone_;
  std::optional<TransitionLayers<T>> transitions_;
  std::optional<GlobalGuidance<T>> guidance_;
  std::optional<EdgeHead<T>> edge_head_;
  std::optional<SaliencyAttentionHead<T>> sal_head_;
  std::optional<DepthAttentionHead<T>> depth_head_;
  std::optional<AttentionFusion<T>> fusion_;
  std::optional<Conv2d<T>> final_conv_;
};

}  // namespace cosal
