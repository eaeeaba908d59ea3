#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "halo/metrics.hpp"
#include "halo/rng.hpp"

using namespace halo;

namespace {

SynonymMap demo_map() {
  SynonymMap map;
  map.add("dog", "dog");
  map.add("puppy", "dog");
  map.add("frisbee", "frisbee");
  map.add("cat", "cat");
  map.add("sofa", "sofa");
  map.add("hot dog", "hot dog");
  return map;
}

CaptionRecord rec(const std::string& id, const std::string& text) {
  return CaptionRecord{id, "", Caption::make(text), {}};
}

}  // namespace

TEST(ExtractObjects, HandScan) {
  auto map = demo_map();
  EXPECT_EQ(extract_objects(Caption::make("A dog catches a frisbee"), map),
            (std::set<std::string>{"dog", "frisbee"}));
}

TEST(ExtractObjects, EmptyCaption) {
  EXPECT_TRUE(extract_objects(Caption::make(""), demo_map()).empty());
}

TEST(ExtractObjects, SynonymCollapseAndDedupe) {
  EXPECT_EQ(extract_objects(Caption::make("A puppy and a dog"), demo_map()),
            (std::set<std::string>{"dog"}));
}

TEST(ExtractObjects, MultiWordWinsOverSingle) {
  // "hot dog" must not double-count as "dog"
  EXPECT_EQ(extract_objects(Caption::make("a HOT DOG on a plate"), demo_map()),
            (std::set<std::string>{"hot dog"}));
  EXPECT_EQ(extract_objects(Caption::make("a hot dog next to a dog"), demo_map()),
            (std::set<std::string>{"hot dog", "dog"}));
}

TEST(ChairReport, HandEnumeratedExample) {
  // c1 mentions {dog,frisbee} with gt {dog};  c2 mentions {cat} with gt {cat,sofa}
  AnnotationSet ann{{"c1", {"dog"}}, {"c2", {"cat", "sofa"}}};
  std::vector<CaptionRecord> records{rec("c1", "a dog with a frisbee"), rec("c2", "a cat")};
  ChairReport r = chair_report(records, ann, demo_map());
  EXPECT_DOUBLE_EQ(r.chair_i, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.chair_s, 1.0 / 2.0);
  EXPECT_DOUBLE_EQ(r.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.average, (r.chair_s + r.chair_i) / 2.0);
  EXPECT_DOUBLE_EQ(r.mean_length, (5.0 + 2.0) / 2.0);
}

TEST(ChairReport, PerfectCaptionsScoreZero) {
  AnnotationSet ann{{"c1", {"dog"}}, {"c2", {"cat"}}};
  std::vector<CaptionRecord> records{rec("c1", "a dog"), rec("c2", "a cat")};
  ChairReport r = chair_report(records, ann, demo_map());
  EXPECT_DOUBLE_EQ(r.chair_i, 0.0);
  EXPECT_DOUBLE_EQ(r.chair_s, 0.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
}

TEST(ChairReport, Errors) {
  AnnotationSet ann{{"c1", {"dog"}}};
  EXPECT_THROW(chair_report({}, ann, demo_map()), EmptyCorpus);
  std::vector<CaptionRecord> records{rec("cX", "a dog")};
  EXPECT_THROW(chair_report(records, ann, demo_map()), MissingAnnotation);
}

TEST(ChairReport, PerSentenceFlag) {
  AnnotationSet ann{{"c1", {"dog"}}};
  // two sentences, only the second hallucinates
  std::vector<CaptionRecord> records{rec("c1", "A dog runs. A cat watches.")};
  ChairReport per_caption = chair_report(records, ann, demo_map(), false);
  ChairReport per_sentence = chair_report(records, ann, demo_map(), true);
  EXPECT_DOUBLE_EQ(per_caption.chair_s, 1.0);
  EXPECT_DOUBLE_EQ(per_sentence.chair_s, 0.5);
  EXPECT_DOUBLE_EQ(per_caption.chair_i, per_sentence.chair_i);
}

TEST(ChairReport, OrderInsensitive) {
  AnnotationSet ann{{"a", {"dog"}}, {"b", {"cat", "sofa"}}, {"c", {"frisbee"}}};
  std::vector<CaptionRecord> records{rec("a", "a dog and a cat"), rec("b", "a sofa"),
                                     rec("c", "a frisbee and a dog")};
  ChairReport fwd = chair_report(records, ann, demo_map());
  std::reverse(records.begin(), records.end());
  ChairReport rev = chair_report(records, ann, demo_map());
  EXPECT_DOUBLE_EQ(fwd.chair_i, rev.chair_i);
  EXPECT_DOUBLE_EQ(fwd.chair_s, rev.chair_s);
  EXPECT_DOUBLE_EQ(fwd.recall, rev.recall);
  EXPECT_DOUBLE_EQ(fwd.mean_length, rev.mean_length);
}

TEST(Har, PublishedFixtures) {
  // Table-1 rows: baseline, OPERA, VCD, ICD
  EXPECT_NEAR(har(0.335, 0.810), 0.7304, 5e-4);
  EXPECT_NEAR(har(0.312, 0.768), 0.7258, 5e-4);
  EXPECT_NEAR(har(0.318, 0.7732), 0.7247, 5e-4);
  EXPECT_NEAR(har(0.3625, 0.1631), 0.2596, 5e-4);
}

TEST(Har, BoundaryCases) {
  EXPECT_DOUBLE_EQ(har(0.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(har(0.5, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(har(1.0, 0.0), 0.0);  // q = r = 0 denominator convention
}

TEST(Har, OutOfRangeRejected) {
  EXPECT_THROW(har(-0.1, 0.5), OutOfRange);
  EXPECT_THROW(har(0.1, 1.5), OutOfRange);
  EXPECT_THROW(har(0.1, 0.5, 0.0), OutOfRange);
}

TEST(Har, MonotoneInRecallAndNonHallucinationRate) {
  for (double beta_w : {0.5, 1.0, 2.0}) {
    for (int i = 0; i < 50; ++i) {
      for (int j = 0; j + 1 < 50; ++j) {
        double h = i / 49.0;
        double r0 = j / 49.0, r1 = (j + 1) / 49.0;
        EXPECT_LE(har(h, r0, beta_w), har(h, r1, beta_w) + 1e-12);
        // lower h (higher q) never hurts
        double h0 = (j + 1) / 49.0, h1 = j / 49.0;
        double r = i / 49.0;
        EXPECT_LE(har(h0, r, beta_w), har(h1, r, beta_w) + 1e-12);
      }
    }
  }
}

TEST(Har, F1SymmetrySwapsRoles) {
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    double h = rng.uniform();
    double r = rng.uniform();
    EXPECT_NEAR(har(h, r, 1.0), har(1.0 - r, 1.0 - h, 1.0), 1e-12);
  }
}

TEST(ParseYesNo, Fixtures) {
  EXPECT_EQ(parse_yes_no("Yes, there is a dog."), Verdict::yes);
  EXPECT_EQ(parse_yes_no("No."), Verdict::no);
  EXPECT_EQ(parse_yes_no("There appears to be one."), Verdict::other);
  EXPECT_EQ(parse_yes_no("I know nothing"), Verdict::other);  // no standalone yes/no
  EXPECT_EQ(parse_yes_no("no, but yes"), Verdict::no);        // first standalone wins
  EXPECT_EQ(parse_yes_no(""), Verdict::other);
}

TEST(PopeReport, HandConfusionMatrix) {
  std::vector<std::pair<Verdict, bool>> pairs{{Verdict::yes, true},
                                              {Verdict::no, false},
                                              {Verdict::yes, false},
                                              {Verdict::no, false}};
  PopeSettingResult r = pope_report(pairs);
  EXPECT_EQ(r.counts.tp, 1);
  EXPECT_EQ(r.counts.fp, 1);
  EXPECT_EQ(r.counts.tn, 2);
  EXPECT_EQ(r.counts.fn, 0);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.f1, 2.0 / 3.0);
}

TEST(PopeReport, AllCorrect) {
  std::vector<std::pair<Verdict, bool>> pairs{{Verdict::yes, true}, {Verdict::no, false}};
  PopeSettingResult r = pope_report(pairs);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(r.f1, 1.0);
}

TEST(PopeReport, AllOtherZeroDenominatorConvention) {
  std::vector<std::pair<Verdict, bool>> pairs{{Verdict::other, true}, {Verdict::other, false}};
  PopeSettingResult r = pope_report(pairs);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.0);
  EXPECT_DOUBLE_EQ(r.precision, 0.0);
  EXPECT_DOUBLE_EQ(r.recall, 0.0);
  EXPECT_DOUBLE_EQ(r.f1, 0.0);
  EXPECT_EQ(r.counts.other, 2);
  EXPECT_EQ(r.counts.fn, 1);  // other under a yes label
  EXPECT_EQ(r.counts.fp, 1);  // other under a no label
}

TEST(PopeReport, EmptyRejected) {
  EXPECT_THROW(pope_report({}), EmptyInput);
}

TEST(PopeReport, MatchesBruteForceOnRandomVectors) {
  std::mt19937_64 gen(2025);
  for (int iter = 0; iter < 20; ++iter) {
    std::vector<std::pair<Verdict, bool>> pairs;
    int n = 1 + static_cast<int>(gen() % 1000);
    for (int i = 0; i < n; ++i) {
      Verdict v = static_cast<Verdict>(gen() % 3);
      pairs.emplace_back(v, gen() % 2 == 0);
    }
    // independent tally, no shared code with pope_report
    long tp = 0, fp = 0, tn = 0, fn = 0;
    for (auto [pred, label] : pairs) {
      bool answered_yes = pred == Verdict::yes;
      bool answered_no = pred == Verdict::no;
      if (label && answered_yes) tp++;
      else if (!label && answered_yes) fp++;
      else if (!label && answered_no) tn++;
      else if (label && !answered_yes) fn++;
      else fp++;  // other under a no label
    }
    PopeSettingResult r = pope_report(pairs);
    EXPECT_EQ(r.counts.tp, tp);
    EXPECT_EQ(r.counts.fp, fp);
    EXPECT_EQ(r.counts.tn, tn);
    EXPECT_EQ(r.counts.fn, fn);
    double precision = tp + fp == 0 ? 0.0 : double(tp) / (tp + fp);
    double recall = tp + fn == 0 ? 0.0 : double(tp) / (tp + fn);
    EXPECT_DOUBLE_EQ(r.precision, precision);
    EXPECT_DOUBLE_EQ(r.recall, recall);
    EXPECT_DOUBLE_EQ(r.accuracy, double(tp + tn) / n);
    double f1 = precision + recall == 0 ? 0.0 : 2 * precision * recall / (precision + recall);
    EXPECT_DOUBLE_EQ(r.f1, f1);
  }
}

TEST(MmeReport, AllCorrectScores200) {
  std::vector<MmeAnswer> answers{{"i1", "q1", Verdict::yes, true},
                                 {"i1", "q2", Verdict::no, false},
                                 {"i2", "q3", Verdict::yes, true},
                                 {"i2", "q4", Verdict::no, false}};
  MmeSubtaskResult r = mme_report(answers);
  EXPECT_DOUBLE_EQ(r.score, 200.0);
}

TEST(MmeReport, HandCountedExample) {
  // 2 images / 4 questions, 3 correct, exactly one image fully correct
  std::vector<MmeAnswer> answers{{"i1", "q1", Verdict::yes, true},
                                 {"i1", "q2", Verdict::no, false},
                                 {"i2", "q3", Verdict::yes, true},
                                 {"i2", "q4", Verdict::yes, false}};
  MmeSubtaskResult r = mme_report(answers);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(r.accuracy_plus, 0.5);
  EXPECT_DOUBLE_EQ(r.score, 125.0);
}

TEST(MmeReport, MalformedPairingRejected) {
  std::vector<MmeAnswer> answers{{"i1", "q1", Verdict::yes, true}};
  EXPECT_THROW(mme_report(answers), MalformedPairing);
  EXPECT_THROW(mme_report({}), EmptyInput);
}

TEST(MmeReport, HallTotalSumsSubtasks) {
  MmeReport report;
  report.subtasks[MmeSubtask::existence] = MmeSubtaskResult{1.0, 1.0, 200.0, 4, 2};
  report.subtasks[MmeSubtask::count] = MmeSubtaskResult{0.75, 0.5, 125.0, 4, 2};
  EXPECT_DOUBLE_EQ(report.hall_total(), 325.0);
}

TEST(RobustnessDelta, IdentityAndPercentagePoints) {
  AnnotationSet ann{{"c1", {"dog"}}, {"c2", {"cat", "sofa"}}};
  std::vector<CaptionRecord> before_recs{rec("c1", "a dog"), rec("c2", "a cat and a sofa")};
  std::vector<CaptionRecord> after_recs{rec("c1", "a dog"), rec("c2", "a cat")};
  ChairReport before = chair_report(before_recs, ann, demo_map());
  ChairReport after = chair_report(after_recs, ann, demo_map());

  RobustnessDelta same = robustness_delta(before, before);
  EXPECT_DOUBLE_EQ(same.delta_chair, 0.0);
  EXPECT_DOUBLE_EQ(same.delta_recall, 0.0);

  RobustnessDelta d = robustness_delta(before, after);
  EXPECT_DOUBLE_EQ(d.delta_chair, 0.0);                     // still no hallucinations
  EXPECT_NEAR(d.delta_recall, (2.0 / 3.0 - 1.0) * 100.0, 1e-9);  // lost one gt object
}

TEST(RobustnessDelta, MismatchedCorpusRejected) {
  AnnotationSet ann{{"c1", {"dog"}}, {"c2", {"cat"}}};
  ChairReport a = chair_report({rec("c1", "a dog")}, ann, demo_map());
  ChairReport b = chair_report({rec("c2", "a cat")}, ann, demo_map());
  EXPECT_THROW(robustness_delta(a, b), CorpusMismatch);
}
