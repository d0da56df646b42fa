#include "ualign/trainer/flops.hpp"

#include "json.hpp"

namespace ualign {

std::uint64_t adapter_flops(const AdapterConfig& c, std::size_t frames, Direction direction) {
  std::uint64_t macs = 0;
  std::size_t len = frames;
  std::size_t in_ch = c.in_dim;
  for (std::size_t l = 0; l < c.conv_layers; ++l) {
    len = len < c.conv_kernel ? 0 : (len - c.conv_kernel) / c.conv_stride + 1;
    macs += static_cast<std::uint64_t>(len) * c.hidden_dim * in_ch * c.conv_kernel;
    in_ch = c.hidden_dim;
  }
  macs += static_cast<std::uint64_t>(len) * c.hidden_dim * c.mlp_hidden;
  macs += static_cast<std::uint64_t>(len) * c.mlp_hidden * c.out_dim;
  const std::uint64_t forward = 2 * macs;
  return direction == Direction::kForward ? forward : 2 * forward;
}

std::uint64_t dtw_flops(std::size_t rows, std::size_t cols, std::size_t dim, std::size_t path_length,
                        Direction direction) {
  if (direction == Direction::kForward) return 2ull * rows * cols * dim;
  return 2ull * path_length * dim;
}

std::uint64_t ctc_flops(std::size_t frames, std::size_t vocab, std::size_t dim, std::size_t labels,
                        Direction direction) {
  const std::uint64_t head = 2ull * frames * vocab * dim;
  const std::uint64_t lattice = static_cast<std::uint64_t>(frames) * (2 * labels + 1);
  return direction == Direction::kForward ? head + 2 * lattice : head + 4 * lattice;
}

std::uint64_t cross_entropy_flops(std::size_t positions, std::size_t vocab, Direction) {
  return 2ull * positions * vocab;
}

FlopLedger& FlopLedger::operator+=(const FlopLedger& o) noexcept {
  adapter_fwd += o.adapter_fwd;
  adapter_bwd += o.adapter_bwd;
  loss_fwd += o.loss_fwd;
  loss_bwd += o.loss_bwd;
  llm_fwd += o.llm_fwd;
  llm_bwd += o.llm_bwd;
  return *this;
}

FlopLedger operator-(const FlopLedger& a, const FlopLedger& b) noexcept {
  FlopLedger d;
  d.adapter_fwd = a.adapter_fwd - b.adapter_fwd;
  d.adapter_bwd = a.adapter_bwd - b.adapter_bwd;
  d.loss_fwd = a.loss_fwd - b.loss_fwd;
  d.loss_bwd = a.loss_bwd - b.loss_bwd;
  d.llm_fwd = a.llm_fwd - b.llm_fwd;
  d.llm_bwd = a.llm_bwd - b.llm_bwd;
  return d;
}

std::string FlopLedger::to_json() const {
  nlohmann::ordered_json j;
  j["adapter_fwd"] = adapter_fwd;
  j["adapter_bwd"] = adapter_bwd;
  j["loss_fwd"] = loss_fwd;
  j["loss_bwd"] = loss_bwd;
  j["llm_fwd"] = llm_fwd;
  j["llm_bwd"] = llm_bwd;
  j["total"] = total();
  return j.dump();
}

}  // namespace ualign
