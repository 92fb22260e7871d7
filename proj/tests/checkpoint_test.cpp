#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "magcn/checkpoint.hpp"
#include "magcn/errors.hpp"
#include "magcn/trainer.hpp"
#include "test_util.hpp"

using namespace magcn;

namespace {

MagcnConfig small_config() {
  MagcnConfig c;
  c.d = 8;
  c.heads = 2;
  c.blocks = 1;
  c.sentiment_width = 2;
  c.language_width = 4;
  c.vision_width = 3;
  c.acoustic_width = 3;
  c.vocabulary = {"<unk>", "good", "film"};
  c.polarity_aware_sentiment = true;
  c.loss = LossKind::kCrossEntropy;
  c.modalities = ModalitySet::parse("L+V");
  return c;
}

}  // namespace

TEST(ConfigJson, RoundTrip) {
  const MagcnConfig c = small_config();
  EXPECT_EQ(config_from_json(config_to_json(c)), c);
}

TEST(ConfigJson, MissingKeysKeepDefaults) {
  const MagcnConfig c = config_from_json(nlohmann::json{{"d", 16}, {"L", 4}});
  EXPECT_EQ(c.d, 16u);
  EXPECT_EQ(c.sublayers, 4u);
  EXPECT_EQ(c.heads, MagcnConfig{}.heads);
}

TEST(ConfigJson, UnknownKeyRejected) {
  EXPECT_THROW(config_from_json(nlohmann::json{{"dd", 16}}), ConfigError);
}

TEST(Checkpoint, RoundTripRestoresEveryParameter) {
  MagcnModel model(small_config(), 3);
  const std::vector<std::string> pos{"good"}, neg{"bad"};
  const Lexicon lex = Lexicon::from_words(pos, neg);
  const auto path = std::filesystem::temp_directory_path() / "magcn_ckpt.bin";
  save_checkpoint(path, model, lex);

  const Checkpoint ck = read_checkpoint(path);
  EXPECT_EQ(ck.config, model.config());
  EXPECT_EQ(ck.lexicon.positive_words(), lex.positive_words());
  EXPECT_EQ(ck.lexicon.negative_words(), lex.negative_words());
  EXPECT_EQ(ck.params, model.params().snapshot());

  const MagcnModel restored = instantiate(ck);
  EXPECT_EQ(restored.params().snapshot(), model.params().snapshot());
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto dir = std::filesystem::temp_directory_path();
  std::ofstream(dir / "magcn_bad_magic.bin") << "NOTACKPT";
  EXPECT_THROW(read_checkpoint(dir / "magcn_bad_magic.bin"), ValidationError);

  MagcnModel model(small_config(), 4);
  save_checkpoint(dir / "magcn_full.bin", model, Lexicon());
  const auto size = std::filesystem::file_size(dir / "magcn_full.bin");
  std::filesystem::copy_file(dir / "magcn_full.bin", dir / "magcn_cut.bin",
                             std::filesystem::copy_options::overwrite_existing);
  std::filesystem::resize_file(dir / "magcn_cut.bin", size - 9);
  EXPECT_THROW(read_checkpoint(dir / "magcn_cut.bin"), Error);

  EXPECT_THROW(read_checkpoint(dir / "magcn_missing.bin"), IoError);
}
