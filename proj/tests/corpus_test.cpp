#include "notevec/corpus.h"

#include <random>
#include <regex>

#include <gtest/gtest.h>

#include "notevec/error.h"
#include "test_util.h"

namespace notevec::corpus {
namespace {

using notevec::testing::TempDir;
using notevec::testing::write_text;

std::vector<Sentence> collect(const SentenceStream& stream) {
  std::vector<Sentence> out;
  stream.for_each([&](const Sentence& s) { out.push_back(s); });
  return out;
}

std::string random_text(std::mt19937_64& rng, std::size_t length) {
  static const std::string alphabet =
      "abcXYZ019 .;?!,%-\t\n()'\"\xC3\xA9";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string out;
  for (std::size_t i = 0; i < length; ++i) out.push_back(alphabet[pick(rng)]);
  return out;
}

TEST(NormalizeText, Examples) {
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_text("Pt O2 sat 88%, stable."), "pt o sat stable.");
  EXPECT_EQ(normalize_text("a.b"), "a.b");
}

TEST(NormalizeText, DigitsVanishOtherPunctuationSplits) {
  EXPECT_EQ(normalize_text("a2b"), "ab");
  EXPECT_EQ(normalize_text("a-b"), "a b");
  EXPECT_EQ(normalize_text("  Hello,\tWorld!!  "), "hello world!!");
  EXPECT_EQ(normalize_text("caf\xC3\xA9 au lait"), "caf au lait");
  EXPECT_EQ(normalize_text("12 34"), "");
}

TEST(NormalizeText, IdempotentAndClosedOnRandomInput) {
  std::mt19937_64 rng(11);
  const std::regex allowed("[a-z .;?!]*");
  for (int i = 0; i < 2000; ++i) {
    const auto text = random_text(rng, i % 60);
    const auto once = normalize_text(text);
    EXPECT_EQ(normalize_text(once), once) << text;
    EXPECT_TRUE(std::regex_match(once, allowed)) << once;
    EXPECT_EQ(once.find("  "), std::string::npos);
  }
}

TEST(SplitSentences, Examples) {
  EXPECT_EQ(split_sentences("pt has copd. sats low"),
            (std::vector<Sentence>{{"pt", "has", "copd"}, {"sats", "low"}}));
  EXPECT_TRUE(split_sentences("...").empty());
  EXPECT_EQ(split_sentences("a;b?c!d"), (std::vector<Sentence>{{"a"}, {"b"}, {"c"}, {"d"}}));
}

TEST(SplitSentences, TokensAreLettersAndConserved) {
  std::mt19937_64 rng(12);
  const std::regex token_re("[a-z]+");
  for (int i = 0; i < 2000; ++i) {
    const auto clean = normalize_text(random_text(rng, i % 80));
    std::vector<std::string> flat;
    for (const auto& s : split_sentences(clean)) {
      EXPECT_FALSE(s.empty());
      for (const auto& t : s) {
        EXPECT_TRUE(std::regex_match(t, token_re)) << t;
        flat.push_back(t);
      }
    }
    // Replacing delimiters with blanks and splitting gives the same tokens.
    std::string blanked = clean;
    for (char& ch : blanked) {
      if (kSentenceDelimiters.find(ch) != std::string_view::npos) ch = ' ';
    }
    std::vector<std::string> expected;
    std::istringstream in(blanked);
    for (std::string t; in >> t;) expected.push_back(t);
    EXPECT_EQ(flat, expected) << clean;
  }
}

TEST(CleanNote, FlattensSentences) {
  const auto note = clean_note({"e1", "COPD flare. Sats 88%; on O2!"});
  EXPECT_EQ(note.encounter_id, "e1");
  EXPECT_EQ(note.tokens, (std::vector<std::string>{"copd", "flare", "sats", "on", "o"}));
}

TEST(CorpusStream, EmptyDirectoryYieldsNothing) {
  TempDir dir;
  EXPECT_TRUE(collect(CorpusStream(dir.path())).empty());
}

TEST(CorpusStream, SingleFile) {
  TempDir dir;
  write_text(dir / "a.txt", "a b. c");
  EXPECT_EQ(collect(CorpusStream(dir.path())), (std::vector<Sentence>{{"a", "b"}, {"c"}}));
}

TEST(CorpusStream, FilesInNameOrderAndReplayable) {
  TempDir dir;
  write_text(dir / "b.txt", "third\nfourth. fifth\n");
  write_text(dir / "a.txt", "first\nsecond");
  const CorpusStream stream(dir.path());
  const auto once = collect(stream);
  EXPECT_EQ(once, (std::vector<Sentence>{{"first"}, {"second"}, {"third"}, {"fourth"}, {"fifth"}}));
  EXPECT_EQ(collect(stream), once);
}

TEST(CorpusStream, MissingPathIsIoError) {
  TempDir dir;
  try {
    CorpusStream stream(dir / "nope");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::io);
    EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos);
  }
}

TEST(LoadNotes, HeaderOnly) {
  TempDir dir;
  write_text(dir / "n.csv", "PAT_ENC_CSN_ID,NOTE_TEXT\n");
  EXPECT_TRUE(load_notes(dir / "n.csv").empty());
}

TEST(LoadNotes, RowsInOrderWithQuotedNewlines) {
  TempDir dir;
  write_text(dir / "n.csv",
             "PAT_ENC_CSN_ID,NOTE_TEXT\n"
             "17,\"Line one,\nline \"\"two\"\"\"\r\n"
             "9,plain\n");
  const auto notes = load_notes(dir / "n.csv");
  ASSERT_EQ(notes.size(), 2u);
  EXPECT_EQ(notes[0].encounter_id, "17");
  EXPECT_EQ(notes[0].note_text, "Line one,\nline \"two\"");
  EXPECT_EQ(notes[1].encounter_id, "9");
  EXPECT_EQ(notes[1].note_text, "plain");
}

TEST(LoadNotes, MissingColumnIsSchemaError) {
  TempDir dir;
  write_text(dir / "n.csv", "PAT_ENC_CSN_ID,TEXT\n1,x\n");
  try {
    load_notes(dir / "n.csv");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::schema);
    EXPECT_NE(std::string(e.what()).find("NOTE_TEXT"), std::string::npos);
  }
}

TEST(LoadNotes, BadRowNamesRowNumber) {
  TempDir dir;
  write_text(dir / "n.csv", "PAT_ENC_CSN_ID,NOTE_TEXT\n1,ok\n2,too,many\n");
  try {
    load_notes(dir / "n.csv");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::format);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(LoadNotes, WriteThenLoadPreservesNotes) {
  TempDir dir;
  const std::vector<RawNote> notes = {{"1", "has, commas"}, {"2", "multi\nline \"quoted\""}, {"3", ""}};
  write_notes(dir / "n.csv", notes);
  const auto back = load_notes(dir / "n.csv");
  ASSERT_EQ(back.size(), notes.size());
  for (std::size_t i = 0; i < notes.size(); ++i) {
    EXPECT_EQ(back[i].encounter_id, notes[i].encounter_id);
    EXPECT_EQ(back[i].note_text, notes[i].note_text);
  }
}

}  // namespace
}  // namespace notevec::corpus
