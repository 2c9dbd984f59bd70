#include "jcas/cli/spec_file.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace jcas::cli {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream is(s);
  while (std::getline(is, part, sep)) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

struct Reader {
  const KeyValueFile& kv;
  const KeyValueFile::Entry* e = nullptr;

  [[noreturn]] void fail(const std::string& what) const { throw SpecError(kv.source, e ? e->line : 0, what); }

  double number(const std::string& s) const {
    double v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("'" + s + "' is not a number");
    return v;
  }
  long integer(const std::string& s) const {
    long v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("'" + s + "' is not an integer");
    return v;
  }
  std::size_t count(const std::string& s) const {
    const long v = integer(s);
    if (v < 0) fail("'" + s + "' must not be negative");
    return static_cast<std::size_t>(v);
  }
  bool boolean(const std::string& s) const {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    fail("'" + s + "' is not a boolean");
  }
  int beam(const std::string& s) const {
    const long b = integer(s);
    if (b < 3 || b > 14) fail(fmt::format("TX beam {} is outside the usable range 3-14", b));
    return static_cast<int>(b);
  }
};

std::string g(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

KeyValueFile parse_key_values(std::istream& is, const std::string& source) {
  KeyValueFile kv;
  kv.source = source;
  std::string line, section;
  std::size_t no = 0;
  while (std::getline(is, line)) {
    ++no;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw SpecError(source, no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw SpecError(source, no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SpecError(source, no, "expected 'key = value'");
    if (section.empty()) throw SpecError(source, no, "key outside any section");
    KeyValueFile::Entry e{section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), no};
    if (e.key.empty()) throw SpecError(source, no, "empty key");
    kv.entries.push_back(std::move(e));
  }
  return kv;
}

DatasetFile parse_dataset_file(const KeyValueFile& kv) {
  Reader rd{kv};
  DatasetFile out;
  preprocess::DatasetKind kind = preprocess::DatasetKind::Dataset1;
  for (const auto& e : kv.entries)
    if (e.section == "dataset" && e.key == "preset") {
      rd.e = &e;
      try {
        kind = preprocess::dataset_kind_from_string(e.value);
      } catch (const std::invalid_argument&) {
        rd.fail("unknown preset '" + e.value + "'");
      }
    }
  preprocess::DatasetSpec& s = out.spec;
  s = preprocess::DatasetSpec::preset(kind);
  const bool preset_unstack = s.unstack;
  bool subjects_replaced = false, samples_given = false, domains_given = false;
  preprocess::SubjectPlan* current = nullptr;

  for (const auto& e : kv.entries) {
    rd.e = &e;
    const std::string& k = e.key;
    const std::string& v = e.value;
    if (e.section == "dataset") {
      if (k == "preset") continue;
      if (k == "seed") out.seed = static_cast<std::uint64_t>(rd.integer(v));
      else if (k == "unstack") s.unstack = rd.boolean(v);
      else if (k == "fs_collect") s.fs_collect = rd.number(v);
      else if (k == "duration") s.duration = rd.number(v);
      else if (k == "tx_power") s.tx_power = rd.number(v);
      else if (k == "snr_threshold_db") s.snr_threshold_db = rd.number(v);
      else if (k == "orientation_is_domain") s.orientation_is_domain = rd.boolean(v);
      else if (k == "subject_base") {
        const auto p = split(v, ',');
        if (p.size() != 3) rd.fail("subject_base needs x,y,z");
        s.subject_base = csi::Vec3{rd.number(p[0]), rd.number(p[1]), rd.number(p[2])};
      } else if (k == "expected_samples" || k == "expected_domains") {
        std::optional<std::size_t> c;
        if (v != "none") c = rd.count(v);
        (k == "expected_samples" ? s.expected_samples : s.expected_domains) = c;
        (k == "expected_samples" ? samples_given : domains_given) = true;
      } else {
        rd.fail("unknown key '" + k + "' in [dataset]");
      }
    } else if (e.section == "stft") {
      if (k == "reported_fs") s.pipeline.stft.reported_fs = rd.number(v);
      else if (k == "window") s.pipeline.stft.window_len = rd.count(v);
      else if (k == "hop") s.pipeline.stft.hop = rd.count(v);
      else if (k == "normalize") s.pipeline.normalize = rd.boolean(v);
      else rd.fail("unknown key '" + k + "' in [stft]");
    } else if (e.section.rfind("subject", 0) == 0) {
      const auto words = split(e.section, ' ');
      if (words.size() != 2 || words[0] != "subject") rd.fail("section must read [subject <id>]");
      const int id = static_cast<int>(rd.integer(words[1]));
      if (!subjects_replaced) {
        s.subjects.clear();
        subjects_replaced = true;
      }
      if (!current || current->subject_id != id) {
        auto it = std::find_if(s.subjects.begin(), s.subjects.end(),
                               [&](const preprocess::SubjectPlan& p) { return p.subject_id == id; });
        if (it == s.subjects.end()) {
          s.subjects.push_back({});
          s.subjects.back().subject_id = id;
          current = &s.subjects.back();
        } else {
          current = &*it;
        }
      }
      if (k == "tx_beams") {
        current->tx_beams.clear();
        for (const auto& b : split(v, ',')) current->tx_beams.push_back(rd.beam(b));
        if (current->tx_beams.empty()) rd.fail("tx_beams is empty");
      } else if (k == "cell") {
        const auto w = split(v, ' ');
        if (w.size() != 3) rd.fail("cell needs '<class> <orientation> <repetitions>'");
        const auto names = s.class_names();
        const auto it = std::find(names.begin(), names.end(), w[0]);
        if (it == names.end()) rd.fail("unknown class '" + w[0] + "' for this preset");
        preprocess::Cell c;
        c.class_id = static_cast<int>(it - names.begin());
        try {
          c.orientation = csi::orientation_from_string(w[1]);
        } catch (const std::exception&) {
          rd.fail("unknown orientation '" + w[1] + "'");
        }
        const long reps = rd.integer(w[2]);
        if (reps < 1) rd.fail("repetitions must be at least 1");
        c.repetitions = static_cast<int>(reps);
        current->cells.push_back(c);
      } else {
        rd.fail("unknown key '" + k + "' in [" + e.section + "]");
      }
    } else {
      rd.fail("unknown section [" + e.section + "]");
    }
  }
  rd.e = nullptr;
  for (const auto& p : s.subjects)
    if (p.tx_beams.empty() || p.cells.empty())
      throw SpecError(kv.source, 0, fmt::format("subject {} needs tx_beams and at least one cell", p.subject_id));
  if (subjects_replaced || s.unstack != preset_unstack) {
    if (!samples_given) s.expected_samples.reset();
    if (!domains_given) s.expected_domains.reset();
  }
  return out;
}

DatasetFile read_dataset_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw SpecError(path, 0, "cannot open spec file");
  return parse_dataset_file(parse_key_values(is, path));
}

std::string dataset_file_text(const DatasetFile& f) {
  const auto& s = f.spec;
  auto opt = [](const std::optional<std::size_t>& c) { return c ? std::to_string(*c) : std::string("none"); };
  std::string t = "[dataset]\n";
  t += "preset = " + preprocess::to_string(s.which) + "\n";
  t += fmt::format("seed = {}\n", f.seed);
  t += fmt::format("unstack = {}\n", s.unstack);
  t += "fs_collect = " + g(s.fs_collect) + "\n";
  t += "duration = " + g(s.duration) + "\n";
  t += "tx_power = " + g(s.tx_power) + "\n";
  t += "snr_threshold_db = " + g(s.snr_threshold_db) + "\n";
  t += fmt::format("orientation_is_domain = {}\n", s.orientation_is_domain);
  if (s.subject_base)
    t += "subject_base = " + g(s.subject_base->x) + "," + g(s.subject_base->y) + "," + g(s.subject_base->z) + "\n";
  t += "expected_samples = " + opt(s.expected_samples) + "\n";
  t += "expected_domains = " + opt(s.expected_domains) + "\n";
  t += "\n[stft]\n";
  t += "reported_fs = " + g(s.pipeline.stft.reported_fs) + "\n";
  t += fmt::format("window = {}\nhop = {}\nnormalize = {}\n", s.pipeline.stft.window_len, s.pipeline.stft.hop,
                   s.pipeline.normalize);
  const auto names = s.class_names();
  for (const auto& p : s.subjects) {
    t += fmt::format("\n[subject {}]\n", p.subject_id);
    std::string beams;
    for (int b : p.tx_beams) beams += (beams.empty() ? "" : ",") + std::to_string(b);
    t += "tx_beams = " + beams + "\n";
    for (const auto& c : p.cells)
      t += fmt::format("cell = {} {} {}\n", names.at(static_cast<std::size_t>(c.class_id)),
                       csi::to_string(c.orientation), c.repetitions);
  }
  return t;
}

}  // namespace jcas::cli
