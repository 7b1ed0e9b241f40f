#pragma once

#include <string>

#include "mf/metaformer/model.hpp"

namespace mf::metaformer {

// Binary checkpoint: "MFCKPT\0\0", u32 version, the model config as INI text,
// then every named parameter as (name, ndim, dims, float64 data). Integers
// and doubles are little-endian.

void save_checkpoint(MetaFormer& model, const std::string& path);

/// Rebuilds the model from the stored config and restores every parameter.
MetaFormer load_checkpoint(const std::string& path);

/// Restores parameters into an existing model. Names and shapes must match
/// exactly; otherwise a DataError is thrown and the model is left untouched.
void restore_checkpoint(MetaFormer& model, const std::string& path);

ModelConfig read_checkpoint_config(const std::string& path);

}  // namespace mf::metaformer
