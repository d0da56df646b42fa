#pragma once

#include <cstdint>
#include <string>

#include "ualign/adapter/adapter.hpp"
#include "ualign/toyllm/llm.hpp"

namespace ualign {

// Analytic compute accounting, two FLOPs per multiply-accumulate. Only the
// dominant matrix products are charged; elementwise work is ignored.
//
//   adapter forward  sum over conv layers 2*I_l*C_out*C_in*k
//                    + 2*I*hidden*mlp_hidden + 2*I*mlp_hidden*out
//   dtw forward      2*I*J*d (cosine cost matrix)
//   dtw backward     2*|path|*d
//   ctc forward      2*I*V*d (similarity logits) + 2*I*(2L+1) (alpha)
//   ctc backward     2*I*V*d + 4*I*(2L+1) (beta and posteriors)
//   cross entropy    2*S*V each way
//   llm              llm_flops()
// Backward of the adapter and the LLM is twice the forward.
std::uint64_t adapter_flops(const AdapterConfig& config, std::size_t frames, Direction direction);
std::uint64_t dtw_flops(std::size_t rows, std::size_t cols, std::size_t dim, std::size_t path_length,
                        Direction direction);
std::uint64_t ctc_flops(std::size_t frames, std::size_t vocab, std::size_t dim, std::size_t labels,
                        Direction direction);
std::uint64_t cross_entropy_flops(std::size_t positions, std::size_t vocab, Direction direction);

struct FlopLedger {
  std::uint64_t adapter_fwd = 0;
  std::uint64_t adapter_bwd = 0;
  std::uint64_t loss_fwd = 0;
  std::uint64_t loss_bwd = 0;
  std::uint64_t llm_fwd = 0;
  std::uint64_t llm_bwd = 0;

  std::uint64_t total() const noexcept {
    return adapter_fwd + adapter_bwd + loss_fwd + loss_bwd + llm_fwd + llm_bwd;
  }
  FlopLedger& operator+=(const FlopLedger& o) noexcept;
  friend FlopLedger operator-(const FlopLedger& a, const FlopLedger& b) noexcept;
  friend bool operator==(const FlopLedger&, const FlopLedger&) = default;
  std::string to_json() const;
};

}  // namespace ualign
