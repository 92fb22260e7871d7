#include "magcn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>

#include "magcn/errors.hpp"

namespace magcn {

using nlohmann::json;

namespace {

const char* loss_name(LossKind k) { return k == LossKind::kCrossEntropy ? "cross_entropy" : "absolute_error"; }

LossKind loss_from_name(const std::string& s) {
  if (s == "absolute_error") return LossKind::kAbsoluteError;
  if (s == "cross_entropy") return LossKind::kCrossEntropy;
  throw ConfigError("unknown loss kind: " + s);
}

template <typename T>
void put(std::ostream& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw ValidationError("truncated checkpoint " + path.string());
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

std::string get_string(std::istream& in, std::size_t size, const std::filesystem::path& path) {
  std::string s(size, '\0');
  if (size && !in.read(s.data(), static_cast<std::streamsize>(size))) {
    throw ValidationError("truncated checkpoint " + path.string());
  }
  return s;
}

}  // namespace

json config_to_json(const MagcnConfig& c) {
  return {{"d", c.d},
          {"L", c.sublayers},
          {"M", c.heads},
          {"Z", c.blocks},
          {"d_s", c.sentiment_width},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"num_classes", c.num_classes},
          {"use_sentiment_embedding", c.use_sentiment_embedding},
          {"use_consistency_loss", c.use_consistency_loss},
          {"use_dense_gcn", c.use_dense_gcn},
          {"polarity_aware_sentiment", c.polarity_aware_sentiment},
          {"modalities", c.modalities.str()},
          {"loss", loss_name(c.loss)},
          {"d_e", c.language_width},
          {"d_v", c.vision_width},
          {"d_a", c.acoustic_width},
          {"vocabulary", c.vocabulary}};
}

MagcnConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  MagcnConfig c;
  static const std::set<std::string> known = {"d",   "L",   "M",   "Z",   "d_s", "alpha", "beta", "num_classes",
                                              "use_sentiment_embedding", "use_consistency_loss", "use_dense_gcn",
                                              "polarity_aware_sentiment", "modalities", "loss", "d_e", "d_v",
                                              "d_a", "vocabulary"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown model config key: " + key);
  }
  try {
    c.d = j.value("d", c.d);
    c.sublayers = j.value("L", c.sublayers);
    c.heads = j.value("M", c.heads);
    c.blocks = j.value("Z", c.blocks);
    c.sentiment_width = j.value("d_s", c.sentiment_width);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.use_sentiment_embedding = j.value("use_sentiment_embedding", c.use_sentiment_embedding);
    c.use_consistency_loss = j.value("use_consistency_loss", c.use_consistency_loss);
    c.use_dense_gcn = j.value("use_dense_gcn", c.use_dense_gcn);
    c.polarity_aware_sentiment = j.value("polarity_aware_sentiment", c.polarity_aware_sentiment);
    if (j.contains("modalities")) c.modalities = ModalitySet::parse(j["modalities"].get<std::string>());
    if (j.contains("loss")) c.loss = loss_from_name(j["loss"].get<std::string>());
    c.language_width = j.value("d_e", c.language_width);
    c.vision_width = j.value("d_v", c.vision_width);
    c.acoustic_width = j.value("d_a", c.acoustic_width);
    c.vocabulary = j.value("vocabulary", c.vocabulary);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config value: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const MagcnModel& model, const Lexicon& lexicon) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const json header{{"config", config_to_json(model.config())},
                    {"lexicon",
                     {{"positive", std::vector<std::string>(lexicon.positive_words().begin(), lexicon.positive_words().end())},
                      {"negative", std::vector<std::string>(lexicon.negative_words().begin(), lexicon.negative_words().end())}}}};
  const std::string text = header.dump();
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint8_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto records = model.params().snapshot();
  put<std::uint64_t>(out, records.size());
  for (const auto& r : records) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    for (std::size_t e : r.shape) put<std::uint64_t>(out, e);
    for (double v : r.values) put<double>(out, v);
  }
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ValidationError(path.string() + " is not a MAGCN checkpoint");
  }
  const auto version = get<std::uint8_t>(in, path);
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(in, path);
  json header;
  try {
    header = json::parse(get_string(in, header_len, path));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("corrupt checkpoint header: ") + e.what());
  }
  Checkpoint ck;
  ck.config = config_from_json(header.at("config"));
  const auto pos = header.at("lexicon").at("positive").get<std::vector<std::string>>();
  const auto neg = header.at("lexicon").at("negative").get<std::vector<std::string>>();
  ck.lexicon = Lexicon::from_words(pos, neg);

  const auto count = get<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    ParamRecord r;
    r.name = get_string(in, get<std::uint32_t>(in, path), path);
    const auto rank = get<std::uint32_t>(in, path);
    for (std::uint32_t k = 0; k < rank; ++k) r.shape.push_back(get<std::uint64_t>(in, path));
    r.values.resize(shape_numel(r.shape));
    for (double& v : r.values) v = get<double>(in, path);
    ck.params.push_back(std::move(r));
  }
  return ck;
}

MagcnModel instantiate(const Checkpoint& checkpoint) {
  MagcnModel model(checkpoint.config, 0);
  if (checkpoint.params.size() != model.params().size()) {
    throw ValidationError("checkpoint holds " + std::to_string(checkpoint.params.size()) +
                          " tensors, config expects " + std::to_string(model.params().size()));
  }
  model.params().restore(checkpoint.params);
  return model;
}

}  // namespace magcn
