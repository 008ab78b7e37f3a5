#pragma once

// Binary checkpoint, little-endian throughout:
//
//   "FCEN" u32 version
//   u32 n_config, i32 × n_config      base, blocks, k, patch_h, patch_w
//   u32 n_tensors, then per tensor:
//     u32 name_len, name bytes, u8 dtype (1 = f32), u32 rank, u32 dims[rank],
//     f32 payload
//   u8 has_optim, then if set:
//     i64 step, i64 total_steps, f64 lr_init, lr_min, beta1, beta2, eps,
//     f32 first moments then f32 second moments, in tensor order

#include <optional>
#include <string>
#include <vector>

#include "fcenet/file_util.hpp"
#include "fcenet/training.hpp"

namespace fcenet {

class CheckpointError : public IoError {
   public:
    using IoError::IoError;
};

inline constexpr char kCheckpointMagic[4] = {'F', 'C', 'E', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const ModelWeights& weights, const OptimState* optim = nullptr);

struct LoadedCheckpoint {
    ModelWeights weights;
    std::optional<OptimState> optim;
};

LoadedCheckpoint deserialize_checkpoint(const std::string& bytes);

void write_checkpoint(const std::string& path, const ModelWeights& weights, const OptimState* optim = nullptr);
LoadedCheckpoint read_checkpoint(const std::string& path);

// Named tensors as stored, without building a model.
struct StoredTensor {
    std::string name;
    std::vector<int> dims;
    std::size_t numel = 0;
};
std::vector<StoredTensor> list_checkpoint_tensors(const std::string& bytes);

}  // namespace fcenet
