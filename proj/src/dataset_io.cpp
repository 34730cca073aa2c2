#include "sbl/dataset_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sbl/error.hpp"

namespace sbl {

using nlohmann::json;

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
  return r;
}

class Writer {
 public:
  void u64(std::uint64_t v) {
    const std::uint64_t le = to_le(v);
    buf_.append(reinterpret_cast<const char*>(&le), 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::string& s) { buf_ += s; }
  void matrix(const CMatrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        f64(m(r, c).real());
        f64(m(r, c).imag());
      }
    }
  }
  std::string& str() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::string origin) : buf_(buf), origin_(std::move(origin)) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t le = 0;
    std::memcpy(&le, buf_.data() + pos_, 8);
    pos_ += 8;
    return to_le(le);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  CMatrix matrix() {
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    if (rows > (1u << 24) || cols > (1u << 24) || rows * cols * 16 > buf_.size() - pos_) {
      throw FormatError(origin_ + ": array shape header is corrupt");
    }
    CMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double re = f64();
        const double im = f64();
        m(r, c) = cplx(re, im);
      }
    }
    return m;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw FormatError(origin_ + ": truncated dataset file");
  }
  const std::string& buf_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_dataset(const Dataset& ds) {
  std::vector<const CMatrix*> arrays;
  json meta;
  meta["format"] = "sbl-dataset";
  meta["version"] = kDatasetVersion;
  meta["config"] = json::parse(dataset_config_to_json(ds.config));
  meta["snr_convention"] = kSnrConvention;
  meta["sigma2"] = ds.config.sigma2;
  meta["seed"] = ds.config.seed;
  json mats = json::array();
  for (const CMatrix& m : ds.matrices) {
    mats.push_back(arrays.size());
    arrays.push_back(&m);
  }
  meta["matrices"] = mats;
  json insts = json::array();
  for (const DatasetEntry& e : ds.entries) {
    json ij = {{"matrix", e.matrix_index}, {"sparsity", e.sparsity}, {"snr_db", e.snr_db},
               {"snapshots", e.snapshots()}, {"cell", e.cell},       {"seed", e.seed},
               {"support", e.support}};
    ij["y"] = arrays.size();
    arrays.push_back(&e.y);
    ij["x"] = arrays.size();
    arrays.push_back(&e.x);
    insts.push_back(std::move(ij));
  }
  meta["instances"] = std::move(insts);

  Writer w;
  w.bytes(std::string(kDatasetMagic, 8));
  const std::string mtext = meta.dump();
  w.u64(mtext.size());
  w.bytes(mtext);
  w.u64(arrays.size());
  for (const CMatrix* m : arrays) w.matrix(*m);
  const std::uint64_t sum = fnv1a64(w.str().data(), w.str().size());
  w.u64(sum);
  return std::move(w.str());
}

Dataset decode_dataset(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 8 + 8 + 8 + 8 || bytes.compare(0, 8, kDatasetMagic) != 0) {
    throw FormatError(origin + ": not a dataset file (bad magic)");
  }
  {
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    if (to_le(stored) != fnv1a64(bytes.data(), bytes.size() - 8)) throw FormatError(origin + ": checksum mismatch");
  }
  Reader r(bytes, origin);
  r.bytes(8);
  const std::uint64_t mlen = r.u64();
  if (mlen > bytes.size()) throw FormatError(origin + ": metadata length is corrupt");
  Dataset ds;
  try {
    const json meta = json::parse(r.bytes(static_cast<std::size_t>(mlen)));
    if (meta.at("format") != "sbl-dataset") throw FormatError(origin + ": unexpected format tag");
    if (meta.at("version").get<int>() != kDatasetVersion) throw FormatError(origin + ": unsupported dataset version");
    ds.config = parse_dataset_config(meta.at("config").dump());

    const std::uint64_t n_arrays = r.u64();
    std::vector<CMatrix> arrays;
    arrays.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n_arrays, 1u << 20)));
    for (std::uint64_t k = 0; k < n_arrays; ++k) arrays.push_back(r.matrix());
    if (r.pos() != bytes.size() - 8) throw FormatError(origin + ": trailing bytes after arrays");

    auto take = [&](std::size_t idx) -> CMatrix& {
      if (idx >= arrays.size()) throw FormatError(origin + ": array index out of range");
      return arrays[idx];
    };
    for (const auto& idx : meta.at("matrices")) ds.matrices.push_back(take(idx.get<std::size_t>()));
    for (const auto& ij : meta.at("instances")) {
      DatasetEntry e;
      e.matrix_index = ij.at("matrix").get<std::size_t>();
      e.sparsity = ij.at("sparsity").get<int>();
      e.snr_db = ij.at("snr_db").get<double>();
      e.cell = ij.at("cell").get<std::size_t>();
      e.seed = ij.at("seed").get<std::uint64_t>();
      e.support = ij.at("support").get<Support>();
      e.y = take(ij.at("y").get<std::size_t>());
      e.x = take(ij.at("x").get<std::size_t>());
      if (e.snapshots() != ij.at("snapshots").get<int>()) throw FormatError(origin + ": snapshot count mismatch");
      ds.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError(origin + ": malformed metadata: " + e.what());
  }
  ds.validate();
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& path) {
  const std::string bytes = encode_dataset(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path, "write failed");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_dataset(ss.str(), path);
}

}  // namespace sbl
