#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "talkmine/error.hpp"
#include "talkmine/pipeline.hpp"

namespace talkmine::cli {

inline constexpr const char* kVersion = "0.1.0";

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path + " for digest");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

// Audit record of one invocation: configuration, input/output digests, timings.
class RunManifest {
 public:
  explicit RunManifest(std::string command) : command_(std::move(command)) {}

  void input(const std::string& path) {
    if (!path.empty()) inputs_[path] = sha256_file(path);
  }
  // Outputs are keyed by file name so runs into different directories compare.
  void output(const std::string& path) {
    outputs_[std::filesystem::path(path).filename().string()] = sha256_file(path);
  }

  template <typename Fn>
  auto timed(const std::string& stage, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      RunManifest* self;
      std::string stage;
      std::chrono::steady_clock::time_point t0;
      ~Record() {
        self->timings_[stage] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      }
    } rec{this, stage, t0};
    return fn();
  }

  void write(const std::string& path, const PipelineConfig& cfg) const {
    Json j;
    j["tool"] = "talkmine";
    j["version"] = kVersion;
    j["command"] = command_;
    j["config"] = cfg.to_json();
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["timings_ms"] = timings_;
    std::ofstream out(path);
    if (!out) throw InputError("cannot write manifest " + path);
    out << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  std::map<std::string, double> timings_;
};

}  // namespace talkmine::cli
