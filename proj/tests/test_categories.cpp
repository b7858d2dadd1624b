#include <gtest/gtest.h>

#include <fstream>
#include <string>

#include "cxrflag/categories.hpp"
#include "cxrflag/errors.hpp"
#include "test_util.hpp"

namespace cxrflag {
namespace {

TEST(Categorize, SingleKeyword) { EXPECT_EQ(categorize("A pacemaker is in place."), Category::kDevices); }

TEST(Categorize, DevicesOutranksLungs) {
  EXPECT_EQ(categorize("PICC tip in the SVC; lungs are clear."), Category::kDevices);
}

TEST(Categorize, NoKeywordIsOther) { EXPECT_EQ(categorize("Patient is rotated."), Category::kOther); }

TEST(Categorize, WholeWordsOnly) {
  // "clips" is not the keyword "Clip"; "tubes" is not "Tube".
  EXPECT_EQ(categorize("Surgical clips."), Category::kOther);
  EXPECT_EQ(categorize("Mildly enlarged thyroid gland."), Category::kOther);
}

TEST(Categorize, MultiWordKeyword) {
  const auto c = CategoryClassifier::from_json(nlohmann::json::parse(R"({
    "version": 7, "priority": ["Devices"], "fallback": "Other",
    "categories": {"Devices": {"keywords": ["Chest Tube"]}}})"));
  EXPECT_EQ(c.version(), 7);
  EXPECT_EQ(c.classify("Left CHEST  tube in place."), Category::kDevices);
  EXPECT_EQ(c.classify("Tube in the chest."), Category::kOther);
}

TEST(Categorize, AllMatchesInPriorityOrder) {
  const auto m = CategoryClassifier::builtin().matches("Left chest tube with a pleural effusion.");
  EXPECT_EQ(m, (std::vector<Category>{Category::kDevices, Category::kPleural}));
}

TEST(Categorize, UnknownCategoryInTable) {
  EXPECT_THROW(CategoryClassifier::from_json(nlohmann::json::parse(R"({
    "version": 1, "priority": ["Bones"], "fallback": "Other",
    "categories": {"Bones": {"keywords": ["Rib"]}}})")),
               DataError);
}

TEST(Categorize, LabeledFixtureAgreesFully) {
  std::ifstream in(testing::fixture_dir() / "categories.tsv");
  ASSERT_TRUE(in);
  std::string line;
  std::getline(in, line);  // header
  int rows = 0;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    ASSERT_NE(tab, std::string::npos) << line;
    const auto want = category_from_string(line.substr(tab + 1));
    ASSERT_TRUE(want.has_value()) << line;
    EXPECT_EQ(categorize(line.substr(0, tab)), *want) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 30);
}

TEST(CategoryNames, RoundTrip) {
  for (auto c : kAllCategories) EXPECT_EQ(category_from_string(to_string(c)), c);
  EXPECT_FALSE(category_from_string("Bones").has_value());
}

}  // namespace
}  // namespace cxrflag
