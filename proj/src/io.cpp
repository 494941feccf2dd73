#include "ran/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace ran {

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(where + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

int parse_int(std::string_view s, const std::string& where) {
  const double v = parse_double(s, where);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) throw ParseError(where + ": expected integer");
  return i;
}

// Calls fn(line_number, fields) for every non-empty line.
template <typename Fn>
void for_each_csv_line(const std::string& path, const Fn& fn) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    fn(line_no, split_csv(line));
  }
}

std::string loc(const std::string& path, int line) {
  return path + ":" + std::to_string(line);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << content;
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace

std::string format_fixed2(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 2);
  return std::string(buf, res.ptr);
}

std::string format_shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

DetectionSet read_detections(const std::string& path) {
  DetectionSet out;
  for_each_csv_line(path, [&](int line_no, const std::vector<std::string_view>& f) {
    const std::string where = loc(path, line_no);
    if (f.size() < 7) throw ParseError(where + ": expected at least 7 fields");
    Detection d;
    d.frame = parse_int(f[0], where);
    if (d.frame < 1) throw ParseError(where + ": frame must be >= 1");
    d.box = {parse_double(f[2], where), parse_double(f[3], where), parse_double(f[4], where),
             parse_double(f[5], where)};
    if (d.box.w <= 0.0 || d.box.h <= 0.0) throw ParseError(where + ": box extents must be > 0");
    d.confidence = parse_double(f[6], where);
    out.add(std::move(d));
  });
  return out;
}

void write_detections(const std::string& path, const DetectionSet& dets) {
  std::string body;
  for (const auto& [frame, rows] : dets.frames()) {
    for (const Detection& d : rows) {
      body += std::to_string(frame) + ",-1," + format_fixed2(d.box.x) + "," +
              format_fixed2(d.box.y) + "," + format_fixed2(d.box.w) + "," +
              format_fixed2(d.box.h) + "," + format_fixed2(d.confidence) + ",-1,-1,-1\n";
    }
  }
  write_file(path, body);
}

GroundTruth read_ground_truth(const std::string& path) {
  GroundTruth out;
  for_each_csv_line(path, [&](int line_no, const std::vector<std::string_view>& f) {
    const std::string where = loc(path, line_no);
    if (f.size() < 7) throw ParseError(where + ": expected at least 7 fields");
    const int frame = parse_int(f[0], where);
    if (frame < 1) throw ParseError(where + ": frame must be >= 1");
    GtEntry e;
    e.id = parse_int(f[1], where);
    e.box = {parse_double(f[2], where), parse_double(f[3], where), parse_double(f[4], where),
             parse_double(f[5], where)};
    if (e.box.w <= 0.0 || e.box.h <= 0.0) throw ParseError(where + ": box extents must be > 0");
    e.visible = parse_double(f[6], where) != 0.0;
    try {
      out.add(frame, std::move(e));
    } catch (const std::invalid_argument& ex) {
      throw ParseError(where + ": " + ex.what());
    }
  });
  return out;
}

void write_ground_truth(const std::string& path, const GroundTruth& gt) {
  std::string body;
  for (const auto& [frame, rows] : gt.frames()) {
    for (const GtEntry& e : rows) {
      body += std::to_string(frame) + "," + std::to_string(e.id) + "," +
              format_fixed2(e.box.x) + "," + format_fixed2(e.box.y) + "," +
              format_fixed2(e.box.w) + "," + format_fixed2(e.box.h) + "," +
              (e.visible ? "1" : "0") + ",1,1.00\n";
    }
  }
  write_file(path, body);
}

void read_features(const std::string& path, DetectionSet& dets) {
  struct Row {
    int line_no;
    Vec values;
  };
  std::map<std::pair<int, int>, Row> rows;
  size_t dim = 0;
  for_each_csv_line(path, [&](int line_no, const std::vector<std::string_view>& f) {
    const std::string where = loc(path, line_no);
    if (f.size() < 3) throw ParseError(where + ": expected frame,det_index,values...");
    const int frame = parse_int(f[0], where);
    const int index = parse_int(f[1], where);
    Row row;
    row.line_no = line_no;
    row.values.reserve(f.size() - 2);
    for (size_t i = 2; i < f.size(); ++i) row.values.push_back(parse_double(f[i], where));
    if (dim == 0) dim = row.values.size();
    if (row.values.size() != dim) {
      throw ParseError(where + ": feature dimension " + std::to_string(row.values.size()) +
                       " does not match earlier rows (" + std::to_string(dim) + ")");
    }
    if (!rows.emplace(std::make_pair(frame, index), std::move(row)).second) {
      throw ParseError(where + ": duplicate feature row for frame " + std::to_string(frame) +
                       " index " + std::to_string(index));
    }
  });
  if (rows.size() != dets.total()) {
    throw ParseError(path + ": " + std::to_string(rows.size()) + " feature rows for " +
                     std::to_string(dets.total()) + " detections");
  }
  for (auto& [frame, frame_dets] : dets.frames()) {
    for (size_t i = 0; i < frame_dets.size(); ++i) {
      auto it = rows.find({frame, static_cast<int>(i)});
      if (it == rows.end()) {
        throw ParseError(path + ": missing feature row for frame " + std::to_string(frame) +
                         " index " + std::to_string(i));
      }
      frame_dets[i].appearance = std::move(it->second.values);
    }
  }
}

void write_features(const std::string& path, const DetectionSet& dets) {
  std::string body;
  for (const auto& [frame, rows] : dets.frames()) {
    for (size_t i = 0; i < rows.size(); ++i) {
      body += std::to_string(frame) + "," + std::to_string(i);
      for (double v : rows[i].appearance) {
        body += ",";
        body += format_shortest(v);
      }
      body += "\n";
    }
  }
  write_file(path, body);
}

void write_results(const std::string& path, std::vector<ResultRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.track_id < b.track_id;
  });
  std::string body;
  for (const ResultRow& r : rows) {
    body += std::to_string(r.frame) + "," + std::to_string(r.track_id) + "," +
            format_fixed2(r.box.x) + "," + format_fixed2(r.box.y) + "," +
            format_fixed2(r.box.w) + "," + format_fixed2(r.box.h) + ",1,-1,-1,-1\n";
  }
  write_file(path, body);
}

std::vector<ResultRow> read_results(const std::string& path) {
  std::vector<ResultRow> rows;
  for_each_csv_line(path, [&](int line_no, const std::vector<std::string_view>& f) {
    const std::string where = loc(path, line_no);
    if (f.size() < 6) throw ParseError(where + ": expected at least 6 fields");
    ResultRow r;
    r.frame = parse_int(f[0], where);
    r.track_id = parse_int(f[1], where);
    r.box = {parse_double(f[2], where), parse_double(f[3], where), parse_double(f[4], where),
             parse_double(f[5], where)};
    rows.push_back(r);
  });
  return rows;
}

namespace {

constexpr char kMagic[8] = {'R', 'A', 'N', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, size_t& pos, const std::string& path) {
  if (pos + sizeof(T) > in.size()) throw ParseError(path + ": truncated checkpoint");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void put_tensors(std::string& out, const PredictorParams& params) {
  Vec flat;
  flatten_params(params, flat);
  put<uint64_t>(out, flat.size());
  out.append(reinterpret_cast<const char*>(flat.data()), flat.size() * sizeof(double));
}

void take_tensors(const std::string& in, size_t& pos, PredictorParams& params,
                  const std::string& path) {
  const uint64_t count = take<uint64_t>(in, pos, path);
  if (count != param_count(params)) {
    throw ParseError(path + ": tensor count " + std::to_string(count) +
                     " does not match declared dimensions (" +
                     std::to_string(param_count(params)) + ")");
  }
  if (pos + count * sizeof(double) > in.size()) throw ParseError(path + ": truncated tensors");
  Vec flat(count);
  std::memcpy(flat.data(), in.data() + pos, count * sizeof(double));
  pos += count * sizeof(double);
  size_t cursor = 0;
  unflatten_params(params, flat, cursor);
}

int hidden_dim_of(const Predictor& p) {
  if (const auto* ran = std::get_if<RanParams>(&p.params)) return ran->hidden_dim();
  if (const auto* gd = std::get_if<GruDirectParams>(&p.params)) return gd->hidden_dim();
  return 0;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put<uint32_t>(out, ckpt.version);
  put<uint8_t>(out, static_cast<uint8_t>(ckpt.model.kind()));
  put<uint32_t>(out, static_cast<uint32_t>(ckpt.model.appearance.window));
  put<uint32_t>(out, static_cast<uint32_t>(ckpt.model.appearance.input_dim()));
  put<uint32_t>(out, static_cast<uint32_t>(hidden_dim_of(ckpt.model.appearance)));
  put<uint32_t>(out, static_cast<uint32_t>(ckpt.model.motion.input_dim()));
  put<uint32_t>(out, static_cast<uint32_t>(hidden_dim_of(ckpt.model.motion)));
  put<uint64_t>(out, ckpt.seed);
  put<uint64_t>(out, ckpt.iterations);
  put_tensors(out, ckpt.model.appearance.params);
  put_tensors(out, ckpt.model.motion.params);
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  size_t pos = 0;
  if (buf.size() < sizeof(kMagic) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(path + ": not a checkpoint file (bad magic)");
  }
  pos += sizeof(kMagic);

  Checkpoint ckpt;
  ckpt.version = take<uint32_t>(buf, pos, path);
  if (ckpt.version != 1) {
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(ckpt.version));
  }
  const uint8_t kind_raw = take<uint8_t>(buf, pos, path);
  if (kind_raw > 3) throw ParseError(path + ": bad predictor kind");
  const auto kind = static_cast<PredictorKind>(kind_raw);
  const auto window = static_cast<int>(take<uint32_t>(buf, pos, path));
  const auto app_in = static_cast<int>(take<uint32_t>(buf, pos, path));
  const auto app_hid = static_cast<int>(take<uint32_t>(buf, pos, path));
  const auto mot_in = static_cast<int>(take<uint32_t>(buf, pos, path));
  const auto mot_hid = static_cast<int>(take<uint32_t>(buf, pos, path));
  if (window < 1 || app_in < 1 || mot_in < 1) throw ParseError(path + ": bad dimensions");
  ckpt.seed = take<uint64_t>(buf, pos, path);
  ckpt.iterations = take<uint64_t>(buf, pos, path);

  ckpt.model.appearance = make_predictor(kind, app_in, app_hid, window);
  ckpt.model.motion = make_predictor(kind, mot_in, mot_hid, window);
  take_tensors(buf, pos, ckpt.model.appearance.params, path);
  take_tensors(buf, pos, ckpt.model.motion.params, path);
  if (pos != buf.size()) throw ParseError(path + ": trailing bytes after checkpoint payload");
  return ckpt;
}

}  // namespace ran
