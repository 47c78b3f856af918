#pragma once

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "scgan/errors.hpp"
#include "scgan/json_util.hpp"

namespace scgan {

inline std::string sha256_hex(std::string_view bytes)
{
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int  len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
  {
    throw std::runtime_error("sha256: digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i)
  {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

inline std::string read_file(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw ValidationError("cannot open '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Artifact
{
  std::string   path;  ///< relative to the run directory, '/'-separated
  std::uint64_t bytes = 0;
  std::string   sha256;
};

/// Output directory of one command. Every artifact written through it lands
/// in manifest.json; run.log holds the timestamped log and is not listed.
class RunDir
{
public:
  explicit RunDir(std::filesystem::path root) : root_(std::move(root))
  {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec || !std::filesystem::is_directory(root_))
    {
      throw IoError("cannot create output directory '" + root_.string() + "'");
    }
  }

  std::filesystem::path const &root() const noexcept { return root_; }

  std::filesystem::path path(std::string const &rel) const { return root_ / rel; }

  void write(std::string const &rel, std::string const &content)
  {
    auto const full = root_ / rel;
    std::error_code ec;
    std::filesystem::create_directories(full.parent_path(), ec);
    {
      std::ofstream out(full, std::ios::binary);
      out << content;
      if (!out)
      {
        throw IoError("cannot write '" + full.string() + "'");
      }
    }
    record(rel, content);
  }

  /// Registers a file some other writer already produced.
  void add(std::string const &rel) { record(rel, read_file(root_ / rel)); }

  void log(std::string const &line)
  {
    std::ofstream out(root_ / "run.log", std::ios::app);
    auto const    now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm       tm{};
    gmtime_r(&now, &tm);
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << ' ' << line << '\n';
  }

  std::vector<Artifact> const &artifacts() const noexcept { return artifacts_; }

  json manifest(std::string const &command) const
  {
    auto sorted = artifacts_;
    std::sort(sorted.begin(), sorted.end(), [](auto const &a, auto const &b) { return a.path < b.path; });
    json list = json::array();
    for (auto const &a : sorted)
    {
      list.push_back({{"path", a.path}, {"bytes", a.bytes}, {"sha256", a.sha256}});
    }
    return json{{"command", command}, {"artifacts", list}};
  }

  void write_manifest(std::string const &command)
  {
    std::ofstream out(root_ / "manifest.json", std::ios::binary);
    out << manifest(command).dump(2) << '\n';
    if (!out)
    {
      throw IoError("cannot write manifest in '" + root_.string() + "'");
    }
  }

private:
  void record(std::string const &rel, std::string const &content)
  {
    Artifact a{rel, content.size(), sha256_hex(content)};
    auto it = std::find_if(artifacts_.begin(), artifacts_.end(), [&](auto const &x) { return x.path == rel; });
    if (it == artifacts_.end())
    {
      artifacts_.push_back(std::move(a));
    }
    else
    {
      *it = std::move(a);
    }
  }

  std::filesystem::path root_;
  std::vector<Artifact> artifacts_;
};

}  // namespace scgan
