#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "doctest.h"
#include "grin/checkpoint.hpp"
#include "grin/errors.hpp"
#include "grin/net.hpp"
#include "grin/rng.hpp"

using namespace grin;

namespace {

std::string test_path(const char* leaf) {
  static const std::string dir = [] {
    const std::string d =
        (std::filesystem::temp_directory_path() / "grin_checkpoint_tests").string();
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir + "/" + leaf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void push_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void push_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void push_f64(std::string& out, double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  push_u64(out, bits);
}

std::string header(std::uint64_t entries) {
  std::string out = "GRIN";
  push_u32(out, kCheckpointVersion);
  push_u64(out, entries);
  return out;
}

void push_scalar(std::string& out, const std::string& name, double v) {
  push_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  push_u32(out, 0);
  push_f64(out, v);
}

void push_matrix(std::string& out, const std::string& name, int rows, int cols,
                 const std::vector<double>& values) {
  push_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  push_u32(out, 2);
  push_u64(out, static_cast<std::uint64_t>(rows));
  push_u64(out, static_cast<std::uint64_t>(cols));
  for (double v : values) push_f64(out, v);
}

std::string load_error(const std::string& path) {
  try {
    load_checkpoint(path);
  } catch (const FormatError& e) {
    return e.what();
  }
  return {};
}

ParamMap sample_params(Rng& rng) {
  Tensor4 kernel(2, 3, 3, 3);
  fill_normal(kernel, rng, 0.5);
  Matrix bias(1, 2);
  fill_normal(bias, rng, 0.5);
  Matrix theta(4, 4);
  fill_normal(theta, rng, 0.1);
  ParamMap params;
  params["decoder/conv1/kernel"] = kernel;
  params["decoder/conv1/bias"] = bias;
  params["graph/theta0"] = theta;
  return params;
}

AdamState sample_adam(const ParamMap& params, Rng& rng) {
  AdamState adam;
  adam.lr = 3e-4;
  adam.t = 17;
  for (const auto& [name, value] : params) {
    ParamValue m = value, v = value;
    for (double& x : param_data(m)) x = rng.normal();
    for (double& x : param_data(v)) x = rng.uniform();
    adam.m[name] = std::move(m);
    adam.v[name] = std::move(v);
  }
  return adam;
}

void require_params_equal(const ParamMap& a, const ParamMap& b) {
  REQUIRE(a.size() == b.size());
  for (const auto& [name, value] : a) {
    REQUIRE(b.count(name) == 1);
    REQUIRE(param_data(value) == param_data(b.at(name)));
  }
}

}  // namespace

TEST_CASE("a checkpoint round-trips every value bitwise") {
  Rng rng(121);
  const ParamMap params = sample_params(rng);
  const AdamState adam = sample_adam(params, rng);
  const std::string path = test_path("roundtrip.grin");
  save_checkpoint(path, params, adam, true, 0xABCDEF01u);

  const Checkpoint ck = load_checkpoint(path);
  require_params_equal(ck.params, params);
  CHECK(ck.has_adam);
  CHECK(ck.adam.lr == adam.lr);
  CHECK(ck.adam.beta1 == adam.beta1);
  CHECK(ck.adam.beta2 == adam.beta2);
  CHECK(ck.adam.eps == adam.eps);
  CHECK(ck.adam.t == adam.t);
  require_params_equal(ck.adam.m, adam.m);
  require_params_equal(ck.adam.v, adam.v);
  CHECK(ck.encoder_seed == 0xABCDEF01u);

  const Tensor4& kernel = std::get<Tensor4>(ck.params.at("decoder/conv1/kernel"));
  CHECK(kernel.n == 2);
  CHECK(kernel.c == 3);
  const Matrix& theta = std::get<Matrix>(ck.params.at("graph/theta0"));
  CHECK(theta.rows == 4);
}

TEST_CASE("loading and saving again reproduces the file byte for byte") {
  Rng rng(122);
  const ParamMap params = sample_params(rng);
  const AdamState adam = sample_adam(params, rng);
  const std::string first = test_path("resave_a.grin");
  const std::string second = test_path("resave_b.grin");
  save_checkpoint(first, params, adam);

  const Checkpoint ck = load_checkpoint(first);
  save_checkpoint(second, ck.params, ck.adam, ck.has_adam, ck.encoder_seed);
  REQUIRE(read_file(first) == read_file(second));
}

TEST_CASE("a checkpoint without optimizer state stays without it") {
  Rng rng(123);
  const ParamMap params = sample_params(rng);
  const std::string path = test_path("no_adam.grin");
  save_checkpoint(path, params, AdamState{}, false);

  const Checkpoint ck = load_checkpoint(path);
  CHECK(!ck.has_adam);
  CHECK(ck.adam.m.empty());
  CHECK(ck.adam.v.empty());
  require_params_equal(ck.params, params);

  const std::string resaved = test_path("no_adam_resave.grin");
  save_checkpoint(resaved, ck.params, ck.adam, ck.has_adam, ck.encoder_seed);
  REQUIRE(read_file(path) == read_file(resaved));
}

TEST_CASE("decoder parameters survive the checkpoint round trip") {
  Rng rng(124);
  const DecoderParams dec = DecoderParams::init(rng);
  const std::string path = test_path("decoder.grin");
  save_checkpoint(path, dec.to_params(), AdamState{}, false);
  const Checkpoint ck = load_checkpoint(path);
  const DecoderParams back = DecoderParams::from_params(ck.params);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(back.kernels[i].data == dec.kernels[i].data);
    REQUIRE(back.biases[i].data == dec.biases[i].data);
  }
}

TEST_CASE("a missing file is an io error, not a format error") {
  CHECK_THROWS_AS(load_checkpoint(test_path("does_not_exist.grin")), IoError);
}

TEST_CASE("bad magic bytes name the magic field") {
  Rng rng(125);
  const std::string path = test_path("bad_magic.grin");
  save_checkpoint(path, sample_params(rng), AdamState{}, false);
  std::string bytes = read_file(path);
  bytes[0] = 'X';
  write_file(path, bytes);
  const std::string msg = load_error(path);
  INFO(msg);
  CHECK(msg.find("magic") != std::string::npos);
}

TEST_CASE("an unsupported version is rejected by number") {
  Rng rng(126);
  const std::string path = test_path("bad_version.grin");
  save_checkpoint(path, sample_params(rng), AdamState{}, false);
  std::string bytes = read_file(path);
  bytes[4] = 9;
  write_file(path, bytes);
  const std::string msg = load_error(path);
  INFO(msg);
  CHECK(msg.find("version 9") != std::string::npos);
}

TEST_CASE("truncation anywhere is a format error naming the field") {
  Rng rng(127);
  const std::string full_path = test_path("trunc_src.grin");
  const ParamMap params = sample_params(rng);
  save_checkpoint(full_path, params, sample_adam(params, rng));
  const std::string bytes = read_file(full_path);

  const std::string path = test_path("trunc.grin");
  for (const std::size_t keep :
       {std::size_t{2}, std::size_t{6}, std::size_t{14}, std::size_t{20}, bytes.size() / 3,
        bytes.size() / 2, bytes.size() - 1}) {
    write_file(path, bytes.substr(0, keep));
    const std::string msg = load_error(path);
    INFO("kept " << keep << " bytes: " << msg);
    CHECK(msg.find("truncated") != std::string::npos);
  }
}

TEST_CASE("trailing bytes after the declared entries are rejected") {
  Rng rng(128);
  const std::string path = test_path("trailing.grin");
  save_checkpoint(path, sample_params(rng), AdamState{}, false);
  std::string bytes = read_file(path);
  bytes.append("junk");
  write_file(path, bytes);
  const std::string msg = load_error(path);
  INFO(msg);
  CHECK(msg.find("trailing") != std::string::npos);
}

TEST_CASE("duplicate entries are rejected by name") {
  std::string bytes = header(2);
  push_scalar(bytes, "w", 1.0);
  push_scalar(bytes, "w", 2.0);
  const std::string path = test_path("duplicate.grin");
  write_file(path, bytes);
  const std::string msg = load_error(path);
  INFO(msg);
  CHECK(msg.find("duplicate") != std::string::npos);
  CHECK(msg.find("'w'") != std::string::npos);
}

TEST_CASE("an invalid rank is rejected") {
  std::string bytes = header(1);
  push_u32(bytes, 1);
  bytes.append("w");
  push_u32(bytes, 3);
  push_f64(bytes, 1.0);
  const std::string path = test_path("bad_rank.grin");
  write_file(path, bytes);
  const std::string msg = load_error(path);
  INFO(msg);
  CHECK(msg.find("rank 3") != std::string::npos);
}

TEST_CASE("a zero dimension is rejected") {
  std::string bytes = header(1);
  push_matrix(bytes, "w", 1, 1, {1.0});
  // rewrite the cols dim to zero: it is the 8 bytes before the payload
  for (int i = 0; i < 8; ++i) bytes[bytes.size() - 8 - 1 - i] = 0;
  const std::string path = test_path("zero_dim.grin");
  write_file(path, bytes);
  const std::string msg = load_error(path);
  INFO(msg);
  CHECK(msg.find("invalid dimension") != std::string::npos);
}

TEST_CASE("unknown reserved names are rejected instead of silently kept") {
  std::string bytes = header(1);
  push_scalar(bytes, "adam/unknown", 1.0);
  const std::string path = test_path("reserved.grin");
  write_file(path, bytes);
  const std::string msg = load_error(path);
  INFO(msg);
  CHECK(msg.find("adam/unknown") != std::string::npos);
}

TEST_CASE("partial optimizer scalars are rejected") {
  std::string bytes = header(2);
  push_scalar(bytes, "adam/lr", 1e-4);
  push_scalar(bytes, "meta/encoder_seed", 1.0);
  const std::string path = test_path("partial_adam.grin");
  write_file(path, bytes);
  const std::string msg = load_error(path);
  INFO(msg);
  CHECK(msg.find("1 of 5") != std::string::npos);
}

TEST_CASE("moment entries without the optimizer scalars are rejected") {
  std::string bytes = header(1);
  push_matrix(bytes, "adam/m/w", 1, 2, {0.5, 0.5});
  const std::string path = test_path("orphan_moments.grin");
  write_file(path, bytes);
  const std::string msg = load_error(path);
  INFO(msg);
  CHECK(msg.find("moment") != std::string::npos);
}

TEST_CASE("a non-integral step counter is rejected") {
  std::string bytes = header(5);
  push_scalar(bytes, "adam/beta1", 0.9);
  push_scalar(bytes, "adam/beta2", 0.999);
  push_scalar(bytes, "adam/eps", 1e-8);
  push_scalar(bytes, "adam/lr", 1e-4);
  push_scalar(bytes, "adam/t", 3.5);
  const std::string path = test_path("fractional_t.grin");
  write_file(path, bytes);
  const std::string msg = load_error(path);
  INFO(msg);
  CHECK(msg.find("adam/t") != std::string::npos);
}
