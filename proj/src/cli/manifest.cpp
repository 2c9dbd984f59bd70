#include "jcas/cli/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace jcas::cli {

namespace fs = std::filesystem;

namespace {

class Sha1 {
 public:
  Sha1() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha1(), nullptr) != 1) throw std::runtime_error("sha1 init failed");
  }
  ~Sha1() { EVP_MD_CTX_free(ctx_); }
  Sha1(const Sha1&) = delete;
  Sha1& operator=(const Sha1&) = delete;
  void update(std::string_view b) { EVP_DigestUpdate(ctx_, b.data(), b.size()); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

std::string read_all(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::vector<std::string> listing(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == kManifestName) continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::string sha1_hex(std::string_view bytes) {
  Sha1 h;
  h.update(bytes);
  return h.hex();
}

std::string blob_hash(const fs::path& file) {
  const std::string body = read_all(file);
  Sha1 h;
  const std::string head = "blob " + std::to_string(body.size());
  h.update(head);
  h.update(std::string_view("\0", 1));
  h.update(body);
  return h.hex();
}

std::string tree_hash(const fs::path& dir) {
  if (fs::is_regular_file(dir)) return blob_hash(dir);
  Sha1 h;
  for (const auto& rel : listing(dir)) h.update(blob_hash(dir / rel) + " " + rel + "\n");
  return h.hex();
}

void RunManifest::collect_artifacts(const fs::path& dir) {
  artifacts.clear();
  for (const auto& rel : listing(dir)) artifacts.emplace_back(rel, blob_hash(dir / rel));
}

std::string RunManifest::to_text() const {
  std::string t = "jcas-manifest 1\n";
  t += "command = " + command + "\n";
  t += "run_dir = " + run_dir + "\n";
  std::string s;
  for (auto v : seeds) s += (s.empty() ? "" : ",") + std::to_string(v);
  t += "seeds = " + s + "\n";
  for (const auto& [k, v] : config) t += "config " + k + " = " + v + "\n";
  for (const auto& [p, h] : inputs) t += "input " + h + " " + p + "\n";
  for (const auto& [p, h] : artifacts) t += "artifact " + h + " " + p + "\n";
  if (!dataset_spec.empty()) {
    std::istringstream is(dataset_spec);
    std::string line;
    while (std::getline(is, line)) t += "spec " + line + "\n";
  }
  return t;
}

RunManifest RunManifest::from_text(const std::string& text) {
  RunManifest m;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "jcas-manifest 1") throw std::runtime_error("not a run manifest");
  auto after = [](const std::string& l, const std::string& prefix) { return l.substr(prefix.size()); };
  while (std::getline(is, line)) {
    if (line.rfind("command = ", 0) == 0) {
      m.command = after(line, "command = ");
    } else if (line.rfind("run_dir = ", 0) == 0) {
      m.run_dir = after(line, "run_dir = ");
    } else if (line.rfind("seeds = ", 0) == 0) {
      std::istringstream ss(after(line, "seeds = "));
      std::string v;
      while (std::getline(ss, v, ','))
        if (!v.empty()) m.seeds.push_back(std::stoull(v));
    } else if (line.rfind("config ", 0) == 0) {
      const std::string rest = after(line, "config ");
      const auto eq = rest.find(" = ");
      m.config.emplace_back(rest.substr(0, eq), eq == std::string::npos ? "" : rest.substr(eq + 3));
    } else if (line.rfind("input ", 0) == 0 || line.rfind("artifact ", 0) == 0) {
      const bool in = line[0] == 'i';
      const std::string rest = after(line, in ? "input " : "artifact ");
      const auto sp = rest.find(' ');
      (in ? m.inputs : m.artifacts).emplace_back(rest.substr(sp + 1), rest.substr(0, sp));
    } else if (line.rfind("spec ", 0) == 0 || line == "spec") {
      m.dataset_spec += (line.size() > 5 ? line.substr(5) : std::string()) + "\n";
    }
  }
  return m;
}

void RunManifest::write(const fs::path& dir) const {
  std::ofstream os(dir / kManifestName, std::ios::binary);
  os << to_text();
  if (!os) throw std::runtime_error("cannot write manifest in " + dir.string());
}

RunManifest RunManifest::read(const fs::path& dir) { return from_text(read_all(dir / kManifestName)); }

std::vector<std::string> RunManifest::stale_artifacts(const fs::path& dir) const {
  std::vector<std::string> out;
  for (const auto& [p, h] : artifacts)
    if (!fs::is_regular_file(dir / p) || blob_hash(dir / p) != h) out.push_back(p);
  return out;
}

}  // namespace jcas::cli
