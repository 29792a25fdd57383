#include "reldepth/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "reldepth/error.hpp"
#include "reldepth/io.hpp"

namespace reldepth {

namespace fs = std::filesystem;

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  return std::nullopt;
}

const ClipRecord* Manifest::find(std::string_view id) const {
  for (const auto& c : clips)
    if (c.id == id) return &c;
  return nullptr;
}

std::vector<const ClipRecord*> Manifest::split(Split s) const {
  std::vector<const ClipRecord*> out;
  for (const auto& c : clips)
    if (c.split == s) out.push_back(&c);
  return out;
}

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw FormatError(where + ": " + what);
}

bool has_space(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::size_t parse_index(const std::string& tok, const std::string& where) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) bad(where, "expected an integer, got '" + tok + "'");
  return v;
}

double parse_real(const std::string& tok, const std::string& where) {
  std::istringstream is(tok);
  is.imbue(std::locale::classic());
  double v = 0.0;
  if (!(is >> v) || !is.eof()) bad(where, "expected a number, got '" + tok + "'");
  return v;
}

std::string fmt_real(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void Manifest::validate(bool check_files) const {
  std::set<std::string> ids;
  std::map<std::string, Split> owner;
  auto claim = [&](const std::string& rel, Split s, const std::string& where) {
    if (rel.empty()) bad(where, "empty path");
    if (has_space(rel)) bad(where, "path contains whitespace: '" + rel + "'");
    const auto [it, inserted] = owner.emplace(rel, s);
    if (!inserted && it->second != s)
      bad(where, "file '" + rel + "' is shared by splits " + std::string(split_name(it->second)) + " and " +
                     std::string(split_name(s)));
    if (check_files && !fs::exists(resolve(rel))) bad(where, "missing file '" + rel + "'");
  };
  for (const auto& c : clips) {
    const std::string where = "clip " + c.id;
    if (c.id.empty() || has_space(c.id)) bad(where, "invalid clip id");
    if (!ids.insert(c.id).second) bad(where, "duplicate clip id (clips belong to exactly one split)");
    if (c.size.area() == 0) bad(where, "zero image size");
    if (c.frames.empty()) bad(where, "no frames");
    for (std::size_t i = 0; i < c.frames.size(); ++i) {
      const auto& f = c.frames[i];
      if (f.index != i) bad(where, "frame indices must run 0..n-1 in order");
      if (i > 0 && !(f.timestamp > c.frames[i - 1].timestamp)) bad(where, "timestamps must increase");
      claim(f.image, c.split, where);
      if (!f.disparity.empty()) claim(f.disparity, c.split, where);
    }
    for (const auto& fl : c.flows) {
      if (fl.from >= c.frames.size() || fl.to >= c.frames.size() || fl.from == fl.to)
        bad(where, "flow record references invalid frames");
      claim(fl.path, c.split, where);
    }
    for (const auto& st : c.stereo) {
      if (st.index >= c.frames.size()) bad(where, "stereo record references invalid frame");
      claim(st.right_image, c.split, where);
      claim(st.flow_lr, c.split, where);
      claim(st.flow_rl, c.split, where);
    }
  }
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open manifest");
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  std::map<std::string, std::size_t> index;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    std::istringstream is(line);
    std::vector<std::string> tok;
    for (std::string t; is >> t;) tok.push_back(t);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (!header) {
      if (tok.size() != 2 || tok[0] != "reldepth-manifest") bad(where, "missing 'reldepth-manifest' header");
      if (parse_index(tok[1], where) != static_cast<std::size_t>(Manifest::kVersion))
        bad(where, "unsupported manifest version " + tok[1]);
      header = true;
      continue;
    }
    auto clip_of = [&](const std::string& id) -> ClipRecord& {
      const auto it = index.find(id);
      if (it == index.end()) bad(where, "unknown clip '" + id + "'");
      return m.clips[it->second];
    };
    const std::string& kind = tok[0];
    if (kind == "clip") {
      if (tok.size() != 5) bad(where, "clip record needs 4 fields");
      const auto split = parse_split(tok[2]);
      if (!split) bad(where, "unknown split '" + tok[2] + "'");
      if (index.count(tok[1])) bad(where, "duplicate clip id '" + tok[1] + "'");
      index[tok[1]] = m.clips.size();
      m.clips.push_back({tok[1], *split, {parse_index(tok[3], where), parse_index(tok[4], where)}, {}, {}, {}});
    } else if (kind == "frame") {
      if (tok.size() != 6) bad(where, "frame record needs 5 fields");
      clip_of(tok[1]).frames.push_back(
          {parse_index(tok[2], where), parse_real(tok[3], where), tok[4], tok[5] == "-" ? "" : tok[5]});
    } else if (kind == "flow") {
      if (tok.size() != 5) bad(where, "flow record needs 4 fields");
      clip_of(tok[1]).flows.push_back({parse_index(tok[2], where), parse_index(tok[3], where), tok[4]});
    } else if (kind == "stereo") {
      if (tok.size() != 6) bad(where, "stereo record needs 5 fields");
      clip_of(tok[1]).stereo.push_back({parse_index(tok[2], where), tok[3], tok[4], tok[5]});
    } else {
      bad(where, "unknown record type '" + kind + "'");
    }
  }
  if (!header) throw FormatError(path.string() + ": empty manifest");
  m.validate(true);
  return m;
}

void write_manifest(const fs::path& path, const Manifest& m) {
  m.validate(false);
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot write manifest");
  out << "reldepth-manifest " << Manifest::kVersion << '\n';
  for (const auto& c : m.clips) {
    out << "clip " << c.id << ' ' << split_name(c.split) << ' ' << c.size.height << ' ' << c.size.width << '\n';
    for (const auto& f : c.frames)
      out << "frame " << c.id << ' ' << f.index << ' ' << fmt_real(f.timestamp) << ' ' << f.image << ' '
          << (f.disparity.empty() ? "-" : f.disparity) << '\n';
    for (const auto& fl : c.flows) out << "flow " << c.id << ' ' << fl.from << ' ' << fl.to << ' ' << fl.path << '\n';
    for (const auto& s : c.stereo)
      out << "stereo " << c.id << ' ' << s.index << ' ' << s.right_image << ' ' << s.flow_lr << ' ' << s.flow_rl
          << '\n';
  }
  if (!out) throw FormatError(path.string() + ": write failed");
}

FlowField FileFlowSource::flow(std::size_t from, std::size_t to) const {
  const auto it = files_.find({from, to});
  if (it == files_.end())
    throw std::out_of_range("no flow file for frames " + std::to_string(from) + " -> " + std::to_string(to));
  return read_flo(it->second);
}

ClipSample load_clip(const Manifest& m, const ClipRecord& c) {
  ClipSample clip;
  clip.id = c.id;
  bool all_disparity = true;
  for (const auto& f : c.frames) {
    Image img = read_png(m.resolve(f.image));
    if (img.size() != c.size) throw FormatError(f.image + ": image size does not match clip " + c.id);
    clip.frames.push_back(std::move(img));
    clip.timestamps.push_back(f.timestamp);
    all_disparity = all_disparity && !f.disparity.empty();
  }
  if (all_disparity) {
    for (const auto& f : c.frames) {
      DepthMap d = read_pfm(m.resolve(f.disparity));
      if (d.size != c.size) throw FormatError(f.disparity + ": map size does not match clip " + c.id);
      clip.disparity.push_back(std::move(d));
    }
  }
  std::map<std::pair<std::size_t, std::size_t>, fs::path> files;
  for (const auto& fl : c.flows) files[{fl.from, fl.to}] = m.resolve(fl.path);
  clip.flows = std::make_shared<FileFlowSource>(std::move(files));
  clip.validate();
  return clip;
}

std::vector<SupervisedSample> load_supervised(const Manifest& m, Split split) {
  std::vector<SupervisedSample> out;
  for (const ClipRecord* c : m.split(split))
    for (const auto& f : c->frames) {
      if (f.disparity.empty()) continue;
      SupervisedSample s{read_png(m.resolve(f.image)), read_pfm(m.resolve(f.disparity))};
      if (s.image.size() != s.gt.size) throw FormatError(f.disparity + ": size does not match image");
      out.push_back(std::move(s));
    }
  return out;
}

}  // namespace reldepth
