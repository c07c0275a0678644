// SPDX-License-Identifier: Apache-2.0
#include "pvl/harness/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "pvl/numerics/errors.hpp"

namespace pvl::harness {

using nlohmann::json;

namespace {

json vit_to_json(const backbone::ViTConfig &v) {
  return {{"image_height", v.image_height}, {"image_width", v.image_width},
          {"channels", v.channels},         {"patch_size", v.patch_size},
          {"embed_dim", v.embed_dim},       {"num_heads", v.num_heads},
          {"depth", v.depth},               {"mlp_ratio", v.mlp_ratio},
          {"prefix_len", v.prefix_len},     {"tuned_layers", v.tuned_layers}};
}

template <class T> void read_opt(const json &j, const char *key, T &out) {
  if (!j.contains(key))
    return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception &e) {
    throw ParseError(std::string("bad value for '") + key + "': " + e.what(), 0);
  }
}

backbone::ViTConfig vit_from_json(const json &j) {
  backbone::ViTConfig v;
  read_opt(j, "image_height", v.image_height);
  read_opt(j, "image_width", v.image_width);
  read_opt(j, "channels", v.channels);
  read_opt(j, "patch_size", v.patch_size);
  read_opt(j, "embed_dim", v.embed_dim);
  read_opt(j, "num_heads", v.num_heads);
  read_opt(j, "depth", v.depth);
  read_opt(j, "mlp_ratio", v.mlp_ratio);
  read_opt(j, "prefix_len", v.prefix_len);
  read_opt(j, "tuned_layers", v.tuned_layers);
  return v;
}

json breakdown_to_json(const objectives::LossBreakdown &b) {
  return {{"total", b.total}, {"ce_main", b.ce_main}, {"l_ed", b.l_ed},
          {"l_kd", b.l_kd},   {"l_skd_ce", b.l_skd_ce}};
}

objectives::LossBreakdown breakdown_from_json(const json &j, double alpha,
                                              double beta, double gamma) {
  objectives::LossBreakdown b;
  b.total = j.at("total").get<double>();
  b.ce_main = j.at("ce_main").get<double>();
  b.l_ed = j.at("l_ed").get<double>();
  b.l_kd = j.at("l_kd").get<double>();
  b.l_skd_ce = j.at("l_skd_ce").get<double>();
  b.alpha = alpha;
  b.beta = beta;
  b.gamma = gamma;
  return b;
}

} // namespace

json config_to_json(const ExperimentConfig &c) {
  return {{"method", c.method},
          {"preset", c.preset},
          {"vit", vit_to_json(c.vit)},
          {"alpha", c.weights.alpha},
          {"beta", c.weights.beta},
          {"gamma", c.weights.gamma},
          {"tau", c.weights.tau},
          {"proto_scale", c.proto_scale},
          {"noise_sigma", c.noise_sigma},
          {"lr", c.lr},
          {"pretrain_lr", c.pretrain_lr},
          {"finetune_incremental_lr", c.finetune_incremental_lr},
          {"batch_size", c.batch_size},
          {"pretrain_epochs", c.pretrain_epochs},
          {"base_epochs", c.base_epochs},
          {"incremental_epochs", c.incremental_epochs},
          {"use_pkt_layers", c.use_pkt_layers},
          {"use_modulation", c.use_modulation},
          {"use_b_prompt", c.use_b_prompt},
          {"use_vl_prompt", c.use_vl_prompt},
          {"use_ed", c.use_ed},
          {"use_skd", c.use_skd},
          {"finetune_all", c.finetune_all},
          {"refresh_base_prototypes", c.refresh_base_prototypes},
          {"max_base_steps", c.max_base_steps},
          {"base_only", c.base_only},
          {"seed", c.seed}};
}

ExperimentConfig config_from_json(const json &j) {
  if (!j.is_object())
    throw ParseError("config block is not an object", 0);
  ExperimentConfig c;
  read_opt(j, "method", c.method);
  read_opt(j, "preset", c.preset);
  if (j.contains("vit"))
    c.vit = vit_from_json(j.at("vit"));
  read_opt(j, "alpha", c.weights.alpha);
  read_opt(j, "beta", c.weights.beta);
  read_opt(j, "gamma", c.weights.gamma);
  read_opt(j, "tau", c.weights.tau);
  read_opt(j, "proto_scale", c.proto_scale);
  read_opt(j, "noise_sigma", c.noise_sigma);
  read_opt(j, "lr", c.lr);
  read_opt(j, "pretrain_lr", c.pretrain_lr);
  read_opt(j, "finetune_incremental_lr", c.finetune_incremental_lr);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "pretrain_epochs", c.pretrain_epochs);
  read_opt(j, "base_epochs", c.base_epochs);
  read_opt(j, "incremental_epochs", c.incremental_epochs);
  read_opt(j, "use_pkt_layers", c.use_pkt_layers);
  read_opt(j, "use_modulation", c.use_modulation);
  read_opt(j, "use_b_prompt", c.use_b_prompt);
  read_opt(j, "use_vl_prompt", c.use_vl_prompt);
  read_opt(j, "use_ed", c.use_ed);
  read_opt(j, "use_skd", c.use_skd);
  read_opt(j, "finetune_all", c.finetune_all);
  read_opt(j, "refresh_base_prototypes", c.refresh_base_prototypes);
  read_opt(j, "max_base_steps", c.max_base_steps);
  read_opt(j, "base_only", c.base_only);
  read_opt(j, "seed", c.seed);
  return c;
}

std::string report_to_json(const RunReport &r, const ReportOptions &opt) {
  json sessions = json::array();
  for (const auto &s : r.sessions) {
    json per_class = json::array();
    for (const auto &[cls, acc] : s.per_class)
      per_class.push_back({{"class", cls},
                           {"accuracy", acc},
                           {"count", s.per_class_count.at(cls)}});
    json trace = json::array();
    for (const auto &b : s.loss_trace)
      trace.push_back(breakdown_to_json(b));
    json js = {{"index", s.index},
               {"classes", s.classes},
               {"accuracy", s.accuracy},
               {"per_class", per_class},
               {"steps", s.steps},
               {"prototype_rows", s.prototype_rows},
               {"epoch_mean_loss", s.epoch_mean_loss},
               {"loss_trace", trace},
               {"frozen_identical", s.frozen_identical},
               {"prototypes_identical", s.prototypes_identical},
               {"changed_frozen", s.changed_frozen}};
    if (opt.include_timing)
      js["wall_seconds"] = s.wall_seconds;
    sessions.push_back(std::move(js));
  }
  json doc = {
      {"schema_version", kReportSchemaVersion},
      {"config", config_to_json(r.config)},
      {"pretrain",
       {{"train_accuracy", r.pretrain.train_accuracy},
        {"epoch_mean_loss", r.pretrain.epoch_mean_loss},
        {"steps", r.pretrain.steps}}},
      {"sessions", sessions},
      {"metrics",
       {{"a_base", r.metrics.a_base},
        {"a_last", r.metrics.a_last},
        {"a_avg", r.metrics.a_avg},
        {"fgt", r.metrics.fgt},
        {"base_retention", r.metrics.base_retention}}},
      {"diagnostics",
       {{"bprompt_grad_norms", r.bprompt_grad_norms}, {"fisher", r.fisher}}}};
  return doc.dump(1) + "\n";
}

RunReport report_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error &e) {
    throw ParseError(std::string("report is not valid JSON: ") + e.what(), e.byte);
  }
  try {
    const int version = doc.at("schema_version").get<int>();
    if (version != kReportSchemaVersion)
      throw ParseError("unsupported report schema version " + std::to_string(version), 0);
    RunReport r;
    r.config = config_from_json(doc.at("config"));
    const auto w = r.config.effective_weights();
    const auto &pre = doc.at("pretrain");
    r.pretrain.train_accuracy = pre.at("train_accuracy").get<double>();
    r.pretrain.epoch_mean_loss = pre.at("epoch_mean_loss").get<std::vector<double>>();
    r.pretrain.steps = pre.at("steps").get<std::size_t>();
    for (const auto &js : doc.at("sessions")) {
      SessionReport s;
      s.index = js.at("index").get<std::size_t>();
      s.classes = js.at("classes").get<std::vector<std::uint32_t>>();
      s.accuracy = js.at("accuracy").get<double>();
      for (const auto &pc : js.at("per_class")) {
        const auto cls = pc.at("class").get<std::uint32_t>();
        s.per_class[cls] = pc.at("accuracy").get<double>();
        s.per_class_count[cls] = pc.at("count").get<std::size_t>();
      }
      s.steps = js.at("steps").get<std::size_t>();
      s.prototype_rows = js.at("prototype_rows").get<std::size_t>();
      s.epoch_mean_loss = js.at("epoch_mean_loss").get<std::vector<double>>();
      for (const auto &b : js.at("loss_trace"))
        s.loss_trace.push_back(breakdown_from_json(b, s.index == 0 ? w.alpha : 0.0,
                                                   w.beta, w.gamma));
      s.frozen_identical = js.at("frozen_identical").get<bool>();
      s.prototypes_identical = js.at("prototypes_identical").get<bool>();
      s.changed_frozen = js.at("changed_frozen").get<std::vector<std::string>>();
      if (js.contains("wall_seconds"))
        s.wall_seconds = js.at("wall_seconds").get<double>();
      r.sessions.push_back(std::move(s));
    }
    if (r.sessions.empty())
      throw ParseError("report has no sessions", 0);
    const auto &m = doc.at("metrics");
    r.metrics.a_base = m.at("a_base").get<double>();
    r.metrics.a_last = m.at("a_last").get<double>();
    r.metrics.a_avg = m.at("a_avg").get<double>();
    r.metrics.fgt = m.at("fgt").get<double>();
    r.metrics.base_retention = m.at("base_retention").get<double>();
    const auto &d = doc.at("diagnostics");
    r.bprompt_grad_norms = d.at("bprompt_grad_norms").get<std::vector<double>>();
    r.fisher = d.at("fisher").get<std::map<std::string, double>>();
    return r;
  } catch (const json::exception &e) {
    throw ParseError(std::string("malformed report: ") + e.what(), 0);
  }
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<CsvRow> report_csv_rows(const RunReport &r) {
  std::vector<CsvRow> rows;
  for (const auto &s : r.sessions)
    rows.push_back({s.index, s.accuracy, r.metrics.a_base, r.metrics.a_last,
                    r.metrics.a_avg, r.metrics.fgt});
  return rows;
}

std::string csv_to_text(const std::vector<CsvRow> &rows) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto &r : rows) {
    out += std::to_string(r.session);
    for (double v : {r.accuracy, r.a_base, r.a_last, r.a_avg, r.fgt}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::vector<CsvRow> csv_from_text(std::string_view text) {
  std::vector<CsvRow> rows;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos)
      end = text.size();
    auto line = text.substr(pos, end - pos);
    const std::size_t at = pos;
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    if (line.empty())
      continue;
    if (line_no == 1) {
      if (line != kCsvHeader)
        throw ParseError("unexpected CSV header '" + std::string(line) + "'", at);
      continue;
    }
    std::vector<std::string_view> f;
    std::size_t p = 0;
    for (;;) {
      auto c = line.find(',', p);
      f.push_back(line.substr(p, c - p));
      if (c == std::string_view::npos)
        break;
      p = c + 1;
    }
    auto fail = [&](const std::string &msg) {
      throw ParseError("CSV line " + std::to_string(line_no) + ": " + msg, at);
    };
    if (f.size() != 6)
      fail("expected 6 fields, found " + std::to_string(f.size()));
    CsvRow r;
    auto [q, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), r.session);
    if (ec != std::errc() || q != f[0].data() + f[0].size())
      fail("bad session index");
    double *dst[] = {&r.accuracy, &r.a_base, &r.a_last, &r.a_avg, &r.fgt};
    for (std::size_t i = 0; i < 5; ++i) {
      auto s = f[i + 1];
      auto [q2, ec2] = std::from_chars(s.data(), s.data() + s.size(), *dst[i]);
      if (ec2 != std::errc() || q2 != s.data() + s.size())
        fail("bad number '" + std::string(s) + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

void write_text_file(const std::filesystem::path &path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out)
    throw std::runtime_error("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace pvl::harness
