#include "bcr/model.hpp"

namespace bcr {

void ModelConfig::validate() const {
  if (categories < 1) fail(ErrKind::Config, "categories must be >= 1");
  if (static_cast<int>(category_names.size()) != categories)
    fail(ErrKind::Config, "category_names must match categories");
  if (channels < 1) fail(ErrKind::Config, "channels must be >= 1");
  if (hidden_dim < 4 || hidden_dim % 4) fail(ErrKind::Config, "hidden_dim must be divisible by 4");
  if (heads < 1 || hidden_dim % heads) fail(ErrKind::Config, "heads must divide hidden_dim");
  if (sampling_points < 1) fail(ErrKind::Config, "sampling_points must be >= 1");
  if (num_proposals < 1) fail(ErrKind::Config, "num_proposals must be >= 1");
  if (ref_points < 7) fail(ErrKind::Config, "ref_points must be >= 7 for a stable refit");
  if (pool_size < num_proposals) fail(ErrKind::Config, "pool_size must be >= num_proposals");
}

BcrModel::BcrModel(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  Rng rng(init_seed);
  build(rng);
}

BcrModel::BcrModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) { build(rng); }

void BcrModel::build(Rng& rng) {
  cfg_.validate();
  backbone_ = Backbone(store_, "backbone", cfg_.channels, cfg_.categories, rng);
  acpi_ = AcpiHead(store_, "acpi", cfg_.channels, cfg_.categories, rng);
  RefineConfig rc;
  rc.categories = cfg_.categories;
  rc.num_proposals = cfg_.num_proposals;
  rc.ref_points = cfg_.ref_points;
  rc.hidden_dim = cfg_.hidden_dim;
  rc.heads = cfg_.heads;
  rc.sampling_points = cfg_.sampling_points;
  rc.feat_channels = cfg_.channels;
  hcr_ = Hcr(store_, "hcr", rc, rng);
}

BcrModel::Forward BcrModel::forward(Pass& pass, const Tensor& image) const {
  Forward out;
  out.backbone = backbone_.forward(pass, image);
  const Tensor& f4 = out.backbone.pyramid.level(4);
  AcpiHead::Out head = acpi_.forward(pass, f4);
  out.acpi_offsets = head.offsets;
  Tensor coord_map = build_coord_map(f4.dim(1), f4.dim(2));
  out.cpmap.b = decode_control_points(head.offsets, coord_map);
  out.cpmap.s_init = head.scores;
  const int cells = f4.dim(1) * f4.dim(2);
  out.initial = select_topk(out.cpmap, std::min(cfg_.pool_size, cells), cfg_.num_proposals);
  out.stages = hcr_.forward(pass, out.initial, out.backbone.pyramid);
  return out;
}

}  // namespace bcr
