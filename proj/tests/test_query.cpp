// Copyright (c) 2026 openvoxel contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "mock_scene.hpp"
#include "openvoxel/metrics.hpp"
#include "openvoxel/query.hpp"
#include "support.hpp"

using namespace openvoxel;

namespace {

/// Refines to a fixed phrase, then retrieves a fixed id list.
class FixedChat : public ChatClient {
 public:
  FixedChat(std::string canonical, RetrievalResult r) : canonical_(std::move(canonical)), r_(std::move(r)) {}

 protected:
  std::string do_chat(const ChatRequest& req) const override {
    if (req.system == prompts::kQueryRefinePrompt) return nlohmann::json{{"canonical", canonical_}}.dump();
    return format_retrieval(r_);
  }

 private:
  std::string canonical_;
  RetrievalResult r_;
};

const ObjectRecord& first_object(const ovtest::MockScene& ms) { return ms.synth.objects.at(1); }

}  // namespace

TEST(Refine, BareCategoryPassesThrough) {
  const auto& ms = ovtest::shared_mock_scene();
  const auto& o = first_object(ms);
  const auto req = make_query_request(ms.synth.scene, ms.views[0], o.category);
  EXPECT_EQ(refine_query(req, ms.map, MockChat{}), o.category);
}

TEST(Refine, ColorAndPlacementKept) {
  const auto& ms = ovtest::shared_mock_scene();
  const auto& o = first_object(ms);
  const auto req = make_query_request(ms.synth.scene, ms.views[0], "the " + o.color_name + " " + o.category + " " + o.placement);
  const auto canon = refine_query(req, ms.map, MockChat{});
  EXPECT_EQ(leading_noun(canon), o.category);
  EXPECT_NE(canon.find(o.color_name), std::string::npos);
  EXPECT_THROW(refine_query(make_query_request(ms.synth.scene, ms.views[0], "  "), ms.map, MockChat{}),
               ValidationError);
}

TEST(Refine, RetriesOnceThenFails) {
  class Bad : public ChatClient {
   public:
    mutable int calls = 0;

   protected:
    std::string do_chat(const ChatRequest&) const override {
      ++calls;
      return R"({"canonical": "thing, red"})";
    }
  };
  const auto& ms = ovtest::shared_mock_scene();
  const Bad chat;
  EXPECT_THROW(refine_query(make_query_request(ms.synth.scene, ms.views[0], "x", false), ms.map, chat), ContractError);
  EXPECT_EQ(chat.calls, 2);
}

TEST(Retrieve, ExactCaptionAndTies) {
  const auto& ms = ovtest::shared_mock_scene();
  for (const auto& e : ms.map.entries) {
    const auto r = retrieve(ms.map, e.caption, std::nullopt, MockChat{});
    EXPECT_EQ(r.ids, (std::vector<std::int32_t>{e.id})) << e.caption;
  }
  SceneMap twins;
  twins.entries = {{2, Vec3::Zero(), "cup, red box", 1, false}, {5, Vec3::Zero(), "cup, red box", 1, false}};
  EXPECT_EQ(retrieve(twins, "cup, red", std::nullopt, MockChat{}).ids, (std::vector<std::int32_t>{2}));
  EXPECT_THROW(retrieve(SceneMap{}, "cup", std::nullopt, MockChat{}), ValidationError);
}

TEST(Answer, CategoryQueryMatchesGroundTruthMask) {
  const auto& ms = ovtest::shared_mock_scene();
  for (std::size_t k = 1; k < ms.synth.objects.size(); ++k) {
    const auto& o = ms.synth.objects[k];
    const auto& view = ms.views[k % ms.views.size()];
    const auto a = answer_query(ms.synth.scene, ms.ids, ms.map, make_query_request(ms.synth.scene, view, o.category),
                                MockChat{});
    EXPECT_EQ(a.ids, (std::vector<std::int32_t>{o.gt_id}));
    const auto expected = render_group_mask(ms.synth.scene, view, {o.gt_id}, ms.ids, 0.5);
    EXPECT_EQ(a.mask, expected);
    EXPECT_EQ(iou(a.mask, expected), 1.0);
  }
}

TEST(Answer, OffscreenTargetGivesEmptyMaskButIds) {
  const auto& ms = ovtest::shared_mock_scene();
  const auto away = look_at(Vec3(30, 30, 30), Vec3(60, 60, 60), 16, 16, 18.0, "away");
  const auto& o = first_object(ms);
  const auto a = answer_query(ms.synth.scene, ms.ids, ms.map, make_query_request(ms.synth.scene, away, o.category),
                              MockChat{});
  EXPECT_EQ(count_nonzero(a.mask), 0u);
  EXPECT_EQ(a.ids, (std::vector<std::int32_t>{o.gt_id}));
}

TEST(Answer, MultipleIdsGiveUnion) {
  const auto& ms = ovtest::shared_mock_scene();
  const auto& a_rec = ms.synth.objects[1];
  const auto& b_rec = ms.synth.objects[2];
  const FixedChat chat("cup, red", RetrievalResult{{a_rec.gt_id, b_rec.gt_id},
                                                   {ms.map.find(a_rec.gt_id)->caption, ms.map.find(b_rec.gt_id)->caption},
                                                   std::vector<std::int32_t>{kGroundGtId}});
  const auto& view = ms.views[3];
  const auto ans = answer_query(ms.synth.scene, ms.ids, ms.map, make_query_request(ms.synth.scene, view, "q"), chat);
  const auto ma = render_group_mask(ms.synth.scene, view, {a_rec.gt_id}, ms.ids, 0.5);
  const auto mb = render_group_mask(ms.synth.scene, view, {b_rec.gt_id}, ms.ids, 0.5);
  for (std::size_t p = 0; p < ans.mask.pixel_count(); ++p) EXPECT_EQ(ans.mask.at(p) != 0, ma.at(p) || mb.at(p));
  EXPECT_EQ(ans.candidates, (std::vector<std::int32_t>{kGroundGtId}));
  EXPECT_EQ(ans.canonical_query, "cup, red");
}

TEST(Answer, WritesMaskOverlayAndSidecar) {
  const auto& ms = ovtest::shared_mock_scene();
  const auto& view = ms.views[0];
  const auto& o = first_object(ms);
  const auto a = answer_query(ms.synth.scene, ms.ids, ms.map, make_query_request(ms.synth.scene, view, o.category),
                              MockChat{});
  ovtest::TempDir dir("answer");
  const auto color = render_color(ms.synth.scene, view);
  write_answer(a, color, dir.path());
  const auto mask = decode_mask_png(read_file(dir.file("answer_mask.png")));
  for (std::size_t p = 0; p < mask.pixel_count(); ++p) EXPECT_EQ(mask.at(p) != 0, a.mask.at(p) != 0);
  EXPECT_TRUE(std::filesystem::exists(dir.file("answer_overlay.png")));
  std::ifstream is(dir.file("answer.json"));
  const auto j = nlohmann::json::parse(is);
  EXPECT_EQ(j.at("ids"), nlohmann::json(a.ids));
  EXPECT_EQ(j.at("canonical_query"), a.canonical_query);
}

TEST(Answer, OverlayBlendsRed) {
  ColorImage img(2, 1, 3, 0.5f);
  BinaryMask m(2, 1);
  m(0, 0) = 1;
  const auto out = answer_overlay(img, m);
  EXPECT_FLOAT_EQ(out(0, 0, 0), 0.75f);
  EXPECT_FLOAT_EQ(out(0, 0, 1), 0.25f);
  EXPECT_FLOAT_EQ(out(1, 0, 0), 0.5f);
}
