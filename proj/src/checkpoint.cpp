#include "imaginet/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>

#include "imaginet/errors.hpp"

namespace imaginet {

static_assert(std::numeric_limits<double>::is_iec559, "IEEE-754 doubles required");

namespace binio {

void write_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), b.size());
}

namespace {
template <typename Word>
void write_le(std::ostream& os, Word bits) {
  std::array<char, sizeof(Word)> b;
  for (std::size_t i = 0; i < sizeof(Word); ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(b.data(), b.size());
}

template <typename Word>
Word read_le(std::istream& is) {
  std::array<unsigned char, sizeof(Word)> b;
  is.read(reinterpret_cast<char*>(b.data()), b.size());
  if (!is) throw FormatError("unexpected end of binary data");
  Word w = 0;
  for (std::size_t i = 0; i < sizeof(Word); ++i) w |= static_cast<Word>(b[i]) << (8 * i);
  return w;
}
}  // namespace

void write_f64(std::ostream& os, double v) { write_le(os, std::bit_cast<std::uint64_t>(v)); }
void write_f32(std::ostream& os, float v) { write_le(os, std::bit_cast<std::uint32_t>(v)); }
std::uint32_t read_u32(std::istream& is) { return read_le<std::uint32_t>(is); }
double read_f64(std::istream& is) { return std::bit_cast<double>(read_le<std::uint64_t>(is)); }
float read_f32(std::istream& is) { return std::bit_cast<float>(read_le<std::uint32_t>(is)); }

void expect_magic(std::istream& is, const char (&magic)[5]) {
  char got[4] = {};
  is.read(got, 4);
  if (!is || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected \"") + magic + "\"");
  }
}

}  // namespace binio

namespace {

std::uint32_t narrow(std::size_t n) {
  if (n > 0xffffffffu) throw FormatError("dimension does not fit in 32 bits");
  return static_cast<std::uint32_t>(n);
}

void write_matrix(std::ostream& os, const Matrix& m) {
  for (double x : m.span()) binio::write_f64(os, x);
}

void read_matrix(std::istream& is, Matrix& m) {
  for (double& x : m.span()) x = binio::read_f64(is);
}

void check_version(std::istream& is) {
  const std::uint32_t version = binio::read_u32(is);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return is;
}

}  // namespace

void write_model_checkpoint(std::ostream& os, const ImaginetParams& p) {
  p.check_shapes();
  os.write("IMGN", 4);
  binio::write_u32(os, kCheckpointVersion);
  const ModelDims d = p.dims();
  for (std::size_t v : {d.vocab_size, d.embedding_dim, d.hidden_dim, d.image_dim})
    binio::write_u32(os, narrow(v));
  for (const NamedConstTensor& t : tensors(p)) write_matrix(os, *t.tensor);
}

ImaginetParams read_model_checkpoint(std::istream& is) {
  binio::expect_magic(is, "IMGN");
  check_version(is);
  ModelDims d;
  d.vocab_size = binio::read_u32(is);
  d.embedding_dim = binio::read_u32(is);
  d.hidden_dim = binio::read_u32(is);
  d.image_dim = binio::read_u32(is);
  ImaginetParams p = ImaginetParams::zeros(d);
  for (NamedTensor t : tensors(p)) read_matrix(is, *t.tensor);
  return p;
}

void write_linreg_checkpoint(std::ostream& os, const LinRegParams& p) {
  if (p.b.dim() != p.A.rows()) throw ShapeError("linreg checkpoint: A/b shape mismatch");
  os.write("IMGL", 4);
  binio::write_u32(os, kCheckpointVersion);
  binio::write_u32(os, narrow(p.vocab_size()));
  binio::write_u32(os, narrow(p.image_dim()));
  write_matrix(os, p.A);
  for (double x : p.b) binio::write_f64(os, x);
}

LinRegParams read_linreg_checkpoint(std::istream& is) {
  binio::expect_magic(is, "IMGL");
  check_version(is);
  const std::size_t vocab = binio::read_u32(is);
  const std::size_t K = binio::read_u32(is);
  LinRegParams p{Matrix(K, vocab), Vector(K)};
  read_matrix(is, p.A);
  for (double& x : p.b) x = binio::read_f64(is);
  return p;
}

void save_model(const std::filesystem::path& path, const ImaginetParams& p) {
  auto os = open_out(path);
  write_model_checkpoint(os, p);
  if (!os) throw IoError("failed writing " + path.string());
}

ImaginetParams load_model(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_model_checkpoint(is);
}

void save_linreg(const std::filesystem::path& path, const LinRegParams& p) {
  auto os = open_out(path);
  write_linreg_checkpoint(os, p);
  if (!os) throw IoError("failed writing " + path.string());
}

LinRegParams load_linreg(const std::filesystem::path& path) {
  auto is = open_in(path);
  return read_linreg_checkpoint(is);
}

CheckpointKind peek_checkpoint_kind(const std::filesystem::path& path) {
  auto is = open_in(path);
  char magic[4] = {};
  is.read(magic, 4);
  if (is && std::memcmp(magic, "IMGN", 4) == 0) return CheckpointKind::Model;
  if (is && std::memcmp(magic, "IMGL", 4) == 0) return CheckpointKind::LinReg;
  throw FormatError(path.string() + " is not a checkpoint");
}

}  // namespace imaginet
