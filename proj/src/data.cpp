#include "dem/data.hpp"

#include "dem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace fs = std::filesystem;

namespace dem {
namespace {

constexpr char kFeatureMagic[4] = {'D', 'E', 'M', 'F'};

[[noreturn]] void fail(const std::string& file, const std::string& what) {
  throw IoError(file + ": " + what);
}

[[noreturn]] void fail_line(const std::string& file, std::size_t line,
                            const std::string& what) {
  throw IoError(file + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

Real parse_real(const std::string& file, std::size_t line, const std::string& tok) {
  try {
    std::size_t pos = 0;
    Real v = std::stod(tok, &pos);
    if (pos != tok.size()) fail_line(file, line, "trailing characters in number '" + tok + "'");
    return v;
  } catch (const std::exception&) {
    fail_line(file, line, "cannot parse number '" + tok + "'");
  }
}

int parse_int(const std::string& file, std::size_t line, const std::string& tok) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(tok, &pos);
    if (pos != tok.size()) fail_line(file, line, "trailing characters in integer '" + tok + "'");
    return v;
  } catch (const std::exception&) {
    fail_line(file, line, "cannot parse integer '" + tok + "'");
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t read_u32(std::istream& in, const std::string& file) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) fail(file, "truncated (u32 expected)");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

Matrix load_features_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    fail(path, "bad magic (expected DEMF)");
  }
  const std::uint32_t version = read_u32(in, path);
  if (version != 1) fail(path, "unsupported version " + std::to_string(version));
  const std::uint32_t n = read_u32(in, path);
  const std::uint32_t d = read_u32(in, path);
  if (n == 0 || d == 0) fail(path, "empty feature matrix");
  Matrix features(d, n);
  std::vector<float> row(d);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(sizeof(float) * d))) {
      fail(path, "truncated at sample " + std::to_string(i));
    }
    for (std::uint32_t j = 0; j < d; ++j) features(j, i) = static_cast<Real>(row[j]);
  }
  return features;
}

Matrix load_features_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.size() < 2) fail(path, "needs a header and at least one sample row");
  const auto header = split_csv(lines[0]);
  if (header.empty() || header[0] != "sample_index") {
    fail_line(path, 1, "header must start with sample_index");
  }
  const std::size_t d = header.size() - 1;
  if (d == 0) fail_line(path, 1, "no feature columns");
  Matrix features(static_cast<Index>(d), static_cast<Index>(lines.size() - 1));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto toks = split_csv(lines[r]);
    if (toks.size() != header.size()) {
      fail_line(path, r + 1, "expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(toks.size()));
    }
    const int idx = parse_int(path, r + 1, toks[0]);
    if (idx != static_cast<int>(r - 1)) {
      fail_line(path, r + 1, "sample_index must be consecutive from 0");
    }
    for (std::size_t j = 0; j < d; ++j) {
      features(static_cast<Index>(j), static_cast<Index>(r - 1)) =
          parse_real(path, r + 1, toks[j + 1]);
    }
  }
  return features;
}

std::vector<int> load_labels(const std::string& path, Index num_samples) {
  const auto lines = read_lines(path);
  std::vector<int> labels;
  std::size_t start = 0;
  if (!lines.empty() && lines[0].rfind("sample_index", 0) == 0) start = 1;
  for (std::size_t r = start; r < lines.size(); ++r) {
    if (lines[r].empty()) continue;
    const auto toks = split_csv(lines[r]);
    if (toks.size() != 2) fail_line(path, r + 1, "expected sample_index,class_id");
    const int idx = parse_int(path, r + 1, toks[0]);
    if (idx != static_cast<int>(labels.size())) {
      fail_line(path, r + 1, "sample_index must be consecutive from 0");
    }
    labels.push_back(parse_int(path, r + 1, toks[1]));
  }
  if (static_cast<Index>(labels.size()) != num_samples) {
    fail(path, "sample count mismatch: " + std::to_string(labels.size()) + " labels for " +
                   std::to_string(num_samples) + " feature rows");
  }
  return labels;
}

std::set<int> load_split(const std::string& path) {
  const auto lines = read_lines(path);
  std::set<int> ids;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    if (lines[r].empty()) continue;
    const int id = parse_int(path, r + 1, lines[r]);
    if (!ids.insert(id).second) fail_line(path, r + 1, "duplicate class id");
  }
  if (ids.empty()) fail(path, "no class ids");
  return ids;
}

std::map<int, std::vector<Real>> load_semantic_rows(const std::string& path, std::size_t* dim) {
  const auto lines = read_lines(path);
  if (lines.size() < 2) fail(path, "needs a header and at least one class row");
  const auto header = split_csv(lines[0]);
  if (header.empty() || header[0] != "class_id") fail_line(path, 1, "header must start with class_id");
  *dim = header.size() - 1;
  if (*dim == 0) fail_line(path, 1, "no vector columns");
  std::map<int, std::vector<Real>> rows;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].empty()) continue;
    const auto toks = split_csv(lines[r]);
    if (toks.size() != header.size()) {
      fail_line(path, r + 1, "expected " + std::to_string(header.size()) + " fields");
    }
    const int cls = parse_int(path, r + 1, toks[0]);
    std::vector<Real> vec(*dim);
    for (std::size_t j = 0; j < *dim; ++j) vec[j] = parse_real(path, r + 1, toks[j + 1]);
    if (!rows.emplace(cls, std::move(vec)).second) {
      fail_line(path, r + 1, "duplicate class id " + std::to_string(cls));
    }
  }
  return rows;
}

}  // namespace

int Dataset::class_column(int class_id) const {
  const auto it = std::lower_bound(class_ids.begin(), class_ids.end(), class_id);
  if (it == class_ids.end() || *it != class_id) {
    throw DimensionError("unknown class id " + std::to_string(class_id));
  }
  return static_cast<int>(it - class_ids.begin());
}

const Matrix& Dataset::table(const std::string& modality) const {
  const auto it = semantic.find(modality);
  if (it == semantic.end()) {
    throw ConfigError("dataset has no semantic modality '" + modality + "'");
  }
  return it->second;
}

void validate_dataset(const Dataset& ds, const std::string& origin) {
  if (ds.features.size() == 0) fail(origin, "no features");
  if (static_cast<Index>(ds.labels.size()) != ds.num_samples()) {
    fail(origin, "sample count mismatch between features and labels");
  }
  if (ds.semantic.empty()) fail(origin, "no semantic modality loaded");
  for (int s : ds.seen) {
    if (ds.unseen.count(s)) fail(origin, "split overlap: class " + std::to_string(s) +
                                             " listed as both seen and unseen");
  }
  std::set<int> known(ds.class_ids.begin(), ds.class_ids.end());
  for (const auto& [name, tab] : ds.semantic) {
    if (tab.cols() != static_cast<Index>(ds.class_ids.size())) {
      fail(origin, "semantic_" + name + " covers " + std::to_string(tab.cols()) +
                       " classes, expected " + std::to_string(ds.class_ids.size()));
    }
  }
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    const int cls = ds.labels[i];
    if (!known.count(cls)) {
      fail(origin, "sample " + std::to_string(i) + " labelled with class " +
                       std::to_string(cls) + " which has no semantic vector");
    }
    const bool in_seen = ds.seen.count(cls) > 0;
    const bool in_unseen = ds.unseen.count(cls) > 0;
    if (in_seen == in_unseen) {
      fail(origin, "sample " + std::to_string(i) + " class " + std::to_string(cls) +
                       (in_seen ? " appears in both splits" : " appears in neither split"));
    }
  }
  for (int cls : ds.seen) {
    if (!known.count(cls)) fail(origin, "seen class " + std::to_string(cls) +
                                            " has no semantic vector");
  }
  for (int cls : ds.unseen) {
    if (!known.count(cls)) fail(origin, "unseen class " + std::to_string(cls) +
                                            " has no semantic vector");
  }
  if (!ds.descriptions.empty() &&
      static_cast<Index>(ds.descriptions.size()) != ds.num_samples()) {
    fail(origin, "descriptions cover " + std::to_string(ds.descriptions.size()) +
                     " samples, expected " + std::to_string(ds.num_samples()));
  }
  ensure_finite(ds.features, "dataset features");
}

Dataset load_dataset(const std::string& directory) {
  const fs::path dir(directory);
  if (!fs::is_directory(dir)) throw IoError(directory + ": not a directory");

  Dataset ds;
  const fs::path bin = dir / "features.bin";
  const fs::path csv = dir / "features.csv";
  if (fs::exists(bin)) {
    ds.features = load_features_bin(bin.string());
  } else if (fs::exists(csv)) {
    ds.features = load_features_csv(csv.string());
  } else {
    fail(directory, "neither features.bin nor features.csv present");
  }

  ds.labels = load_labels((dir / "labels.csv").string(), ds.num_samples());
  ds.seen = load_split((dir / "split_seen.txt").string());
  ds.unseen = load_split((dir / "split_unseen.txt").string());

  // Any semantic_<modality>.csv present is loaded.
  std::vector<fs::path> semantic_files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("semantic_", 0) == 0 && name.size() > 13 &&
        name.substr(name.size() - 4) == ".csv") {
      semantic_files.push_back(entry.path());
    }
  }
  std::sort(semantic_files.begin(), semantic_files.end());
  if (semantic_files.empty()) fail(directory, "no semantic_<modality>.csv file found");

  std::set<int> id_set;
  std::map<std::string, std::map<int, std::vector<Real>>> raw;
  std::map<std::string, std::size_t> dims;
  for (const auto& path : semantic_files) {
    const std::string name = path.filename().string();
    const std::string modality = name.substr(9, name.size() - 13);
    std::size_t dim = 0;
    raw[modality] = load_semantic_rows(path.string(), &dim);
    dims[modality] = dim;
    for (const auto& [cls, _] : raw[modality]) id_set.insert(cls);
  }
  ds.class_ids.assign(id_set.begin(), id_set.end());
  for (const auto& [modality, rows] : raw) {
    Matrix tab(static_cast<Index>(dims[modality]), static_cast<Index>(ds.class_ids.size()));
    for (std::size_t c = 0; c < ds.class_ids.size(); ++c) {
      const auto it = rows.find(ds.class_ids[c]);
      if (it == rows.end()) {
        fail(directory, "semantic_" + modality + ".csv is missing class " +
                            std::to_string(ds.class_ids[c]));
      }
      for (std::size_t j = 0; j < dims[modality]; ++j) {
        tab(static_cast<Index>(j), static_cast<Index>(c)) = it->second[j];
      }
    }
    ds.semantic[modality] = std::move(tab);
  }

  const fs::path desc = dir / "descriptions.tsv";
  if (fs::exists(desc)) {
    const auto lines = read_lines(desc.string());
    ds.descriptions.assign(static_cast<std::size_t>(ds.num_samples()), {});
    for (std::size_t r = 0; r < lines.size(); ++r) {
      if (lines[r].empty()) continue;
      const auto tab_pos = lines[r].find('\t');
      if (tab_pos == std::string::npos) fail_line(desc.string(), r + 1, "expected sample_index<TAB>text");
      const int idx = parse_int(desc.string(), r + 1, lines[r].substr(0, tab_pos));
      if (idx < 0 || idx >= static_cast<int>(ds.descriptions.size())) {
        fail_line(desc.string(), r + 1, "sample_index out of range");
      }
      ds.descriptions[static_cast<std::size_t>(idx)].push_back(lines[r].substr(tab_pos + 1));
    }
  }

  validate_dataset(ds, directory);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& directory, bool binary_features) {
  const fs::path dir(directory);
  fs::create_directories(dir);

  if (binary_features) {
    std::ofstream out(dir / "features.bin", std::ios::binary);
    if (!out) fail((dir / "features.bin").string(), "cannot open for writing");
    out.write(kFeatureMagic, 4);
    write_u32(out, 1);
    write_u32(out, static_cast<std::uint32_t>(ds.num_samples()));
    write_u32(out, static_cast<std::uint32_t>(ds.visual_dim()));
    std::vector<float> row(static_cast<std::size_t>(ds.visual_dim()));
    for (Index i = 0; i < ds.num_samples(); ++i) {
      for (Index j = 0; j < ds.visual_dim(); ++j) row[static_cast<std::size_t>(j)] = static_cast<float>(ds.features(j, i));
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(sizeof(float) * row.size()));
    }
  } else {
    std::ofstream out(dir / "features.csv");
    if (!out) fail((dir / "features.csv").string(), "cannot open for writing");
    out << "sample_index";
    for (Index j = 0; j < ds.visual_dim(); ++j) out << ",f" << j;
    out << "\n";
    for (Index i = 0; i < ds.num_samples(); ++i) {
      out << i;
      for (Index j = 0; j < ds.visual_dim(); ++j) out << "," << format_real(ds.features(j, i));
      out << "\n";
    }
  }

  {
    std::ofstream out(dir / "labels.csv");
    out << "sample_index,class_id\n";
    for (std::size_t i = 0; i < ds.labels.size(); ++i) out << i << "," << ds.labels[i] << "\n";
  }
  for (const auto& [modality, tab] : ds.semantic) {
    std::ofstream out(dir / ("semantic_" + modality + ".csv"));
    out << "class_id";
    for (Index j = 0; j < tab.rows(); ++j) out << ",v" << j;
    out << "\n";
    for (std::size_t c = 0; c < ds.class_ids.size(); ++c) {
      out << ds.class_ids[c];
      for (Index j = 0; j < tab.rows(); ++j) {
        out << "," << format_real(tab(j, static_cast<Index>(c)));
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(dir / "split_seen.txt");
    for (int id : ds.seen) out << id << "\n";
  }
  {
    std::ofstream out(dir / "split_unseen.txt");
    for (int id : ds.unseen) out << id << "\n";
  }
  if (!ds.descriptions.empty()) {
    std::ofstream out(dir / "descriptions.tsv");
    for (std::size_t i = 0; i < ds.descriptions.size(); ++i) {
      for (const auto& text : ds.descriptions[i]) out << i << "\t" << text << "\n";
    }
  }
}

Matrix semantic_for_samples(const Dataset& ds, const std::string& modality,
                            const std::vector<Index>& samples) {
  const Matrix& tab = ds.table(modality);
  Matrix out(tab.rows(), static_cast<Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.col(static_cast<Index>(i)) = tab.col(ds.class_column(ds.labels[samples[i]]));
  }
  return out;
}

Matrix prototype_matrix(const Dataset& ds, const std::string& modality,
                        const std::vector<int>& classes) {
  const Matrix& tab = ds.table(modality);
  Matrix out(tab.rows(), static_cast<Index>(classes.size()));
  for (std::size_t i = 0; i < classes.size(); ++i) {
    out.col(static_cast<Index>(i)) = tab.col(ds.class_column(classes[i]));
  }
  return out;
}

std::vector<Index> seen_sample_indices(const Dataset& ds) {
  std::vector<Index> out;
  for (Index i = 0; i < ds.num_samples(); ++i) {
    if (ds.seen.count(ds.labels[i])) out.push_back(i);
  }
  return out;
}

std::vector<Index> unseen_sample_indices(const Dataset& ds) {
  std::vector<Index> out;
  for (Index i = 0; i < ds.num_samples(); ++i) {
    if (ds.unseen.count(ds.labels[i])) out.push_back(i);
  }
  return out;
}

Matrix features_of(const Dataset& ds, const std::vector<Index>& samples) {
  Matrix out(ds.visual_dim(), static_cast<Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out.col(static_cast<Index>(i)) = ds.features.col(samples[i]);
  }
  return out;
}

ValidationSplit make_validation_split(const Dataset& ds, Real fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0) {
    throw ConfigError("make_validation_split: fraction must be in (0, 1)");
  }
  std::vector<int> seen_classes(ds.seen.begin(), ds.seen.end());
  if (seen_classes.size() < 2) {
    throw ConfigError("make_validation_split: need at least 2 seen classes");
  }
  Rng rng(seed);
  const auto perm = rng.permutation(static_cast<int>(seen_classes.size()));
  int num_val = static_cast<int>(std::lround(fraction * static_cast<Real>(seen_classes.size())));
  num_val = std::max(1, std::min(num_val, static_cast<int>(seen_classes.size()) - 1));

  std::set<int> val_classes, train_classes;
  for (std::size_t i = 0; i < seen_classes.size(); ++i) {
    const int cls = seen_classes[static_cast<std::size_t>(perm[i])];
    if (static_cast<int>(i) < num_val) {
      val_classes.insert(cls);
    } else {
      train_classes.insert(cls);
    }
  }

  auto subset = [&](const std::set<int>& keep) {
    Dataset part;
    part.class_ids = ds.class_ids;
    part.semantic = ds.semantic;
    part.seen = train_classes;
    part.unseen = val_classes;
    std::vector<Index> samples;
    for (Index i = 0; i < ds.num_samples(); ++i) {
      if (keep.count(ds.labels[i])) samples.push_back(i);
    }
    part.features = features_of(ds, samples);
    part.labels.reserve(samples.size());
    for (Index s : samples) part.labels.push_back(ds.labels[s]);
    if (!ds.descriptions.empty()) {
      part.descriptions.reserve(samples.size());
      for (Index s : samples) part.descriptions.push_back(ds.descriptions[s]);
    }
    return part;
  };

  ValidationSplit split;
  split.train_part = subset(train_classes);
  split.val_part = subset(val_classes);
  return split;
}

SynthResult synth_generate(const SynthSpec& spec) {
  if (spec.visual_dim < 1 || spec.semantic_dim < 1 || spec.num_seen < 1 ||
      spec.num_unseen < 1 || spec.samples_per_class < 1) {
    throw ConfigError("synth_generate: all counts must be >= 1");
  }
  if (spec.noise_sigma < 0.0) throw ConfigError("synth_generate: noise_sigma must be >= 0");
  if (spec.depth < 1) throw ConfigError("synth_generate: depth must be >= 1");
  if (spec.linear_rank < 1 || spec.linear_rank > spec.semantic_dim) {
    throw ConfigError("synth_generate: linear_rank must be in [1, semantic_dim]");
  }

  const int D = spec.visual_dim;
  const int L = spec.semantic_dim;
  const int C = spec.num_seen + spec.num_unseen;

  // Scaffold: the fixed feature-space geometry.
  Rng srng(spec.scaffold_seed);
  const Real inv_sqrt_l = 1.0 / std::sqrt(static_cast<Real>(L));
  Matrix bump_proj = spec.bump_width * inv_sqrt_l * srng.normal_matrix(1, L);
  Matrix lin_left = srng.normal_matrix(D, spec.linear_rank) /
                    std::sqrt(static_cast<Real>(spec.linear_rank));
  Matrix lin_right = inv_sqrt_l * srng.normal_matrix(spec.linear_rank, L);
  Matrix bump_mix = srng.normal_matrix(D, 1);
  Matrix offsets = srng.normal_matrix(D, 1).cwiseAbs();

  // Class prototypes and per-sample noise come from the sampling seed.
  Rng rng(spec.seed);
  Matrix prototypes = rng.normal_matrix(L, C);

  // Nonlinear path: an even pair of opposing tanh units per projection,
  // sharpened by further tanh stages for depth > 1.
  Matrix u = bump_proj * prototypes;                       // 1 x C
  Matrix bump = ((u.array() + 1.0).tanh() + (1.0 - u.array()).tanh()).matrix();
  for (int stage = 1; stage < spec.depth; ++stage) {
    bump = (bump.array() - 1.0).tanh().matrix();
  }

  Matrix raw = lin_left * (lin_right * prototypes) + spec.bump_scale * (bump_mix * bump);
  const Vector row_mean = raw.rowwise().mean();
  raw.colwise() -= row_mean;
  Matrix means =
      spec.feature_scale * (raw + spec.offset_scale * offsets * Matrix::Ones(1, C));

  Dataset ds;
  const Index n = static_cast<Index>(C) * spec.samples_per_class;
  ds.features.resize(D, n);
  ds.labels.reserve(static_cast<std::size_t>(n));
  Index col = 0;
  for (int c = 0; c < C; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s) {
      for (int j = 0; j < D; ++j) {
        ds.features(j, col) = means(j, c) + spec.noise_sigma * rng.normal();
      }
      ds.labels.push_back(c);
      ++col;
    }
  }
  ds.class_ids.resize(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) ds.class_ids[static_cast<std::size_t>(c)] = c;
  ds.semantic["attribute"] = prototypes;
  for (int c = 0; c < spec.num_seen; ++c) ds.seen.insert(c);
  for (int c = spec.num_seen; c < C; ++c) ds.unseen.insert(c);

  validate_dataset(ds, "synth_generate");

  SynthResult result;
  result.dataset = std::move(ds);
  result.generator_weights = {std::move(bump_proj), std::move(lin_left),
                              std::move(lin_right), std::move(bump_mix),
                              std::move(offsets)};
  return result;
}

}  // namespace dem
