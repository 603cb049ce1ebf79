#pragma once

// Binary checkpoint containers. All integers are 32-bit little-endian
// unsigned, all reals 64-bit little-endian IEEE-754.
//
//   model:    "IMGN" version vocab_size embedding_dim hidden_dim K
//             then the 15 tensors of `tensors(ImaginetParams&)`, each row-major
//   baseline: "IMGL" version vocab_size K
//             then A (K × vocab_size) row-major, then b (K)

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "imaginet/baseline.hpp"
#include "imaginet/model.hpp"

namespace imaginet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind { Model, LinReg };

void write_model_checkpoint(std::ostream& os, const ImaginetParams& p);
ImaginetParams read_model_checkpoint(std::istream& is);

void write_linreg_checkpoint(std::ostream& os, const LinRegParams& p);
LinRegParams read_linreg_checkpoint(std::istream& is);

void save_model(const std::filesystem::path& path, const ImaginetParams& p);
ImaginetParams load_model(const std::filesystem::path& path);
void save_linreg(const std::filesystem::path& path, const LinRegParams& p);
LinRegParams load_linreg(const std::filesystem::path& path);

/// Reads the magic bytes only. Throws FormatError for unknown files.
CheckpointKind peek_checkpoint_kind(const std::filesystem::path& path);

namespace binio {
void write_u32(std::ostream& os, std::uint32_t v);
void write_f64(std::ostream& os, double v);
void write_f32(std::ostream& os, float v);
std::uint32_t read_u32(std::istream& is);
double read_f64(std::istream& is);
float read_f32(std::istream& is);
void expect_magic(std::istream& is, const char (&magic)[5]);
}  // namespace binio

}  // namespace imaginet
