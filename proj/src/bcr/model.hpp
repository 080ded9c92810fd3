#pragma once

#include "bcr/backbone.hpp"
#include "bcr/proposals.hpp"
#include "bcr/refinement.hpp"

namespace bcr {

struct ModelConfig {
  int categories = 3;      // M
  int channels = 32;       // backbone/pyramid channel count
  int hidden_dim = 64;     // decoder width D
  int heads = 8;
  int sampling_points = 4;
  int num_proposals = 10;  // K
  int ref_points = 26;     // N
  int pool_size = 256;
  std::vector<std::string> category_names = {"ridge", "ligament", "silhouette"};

  void validate() const;
};

// The full detection pipeline: backbone features, pixel-aligned proposal
// initialization over f4, and three hierarchical refinement stages.
class BcrModel {
 public:
  explicit BcrModel(const ModelConfig& cfg, uint64_t init_seed = 0);
  BcrModel(const ModelConfig& cfg, Rng& rng);

  struct Forward {
    BackboneOut backbone;
    Tensor acpi_offsets;  // [M,H4,W4,12]
    ControlPointMap cpmap;
    ProposalBatch initial;             // stage 0
    std::array<StageOutput, 3> stages;  // stages 1..3
  };

  Forward forward(Pass& pass, const Tensor& image) const;

  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  void build(Rng& rng);

  ModelConfig cfg_;
  ParamStore store_;
  Backbone backbone_;
  AcpiHead acpi_;
  Hcr hcr_;
};

}  // namespace bcr
