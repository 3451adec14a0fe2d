#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace notevec::corpus {

/// Lowercase tokens made only of the letters a-z.
using Sentence = std::vector<std::string>;

struct RawNote {
  std::string encounter_id;
  std::string note_text;
};

/// A note reduced to its token sequence; sentence boundaries are discarded.
struct CleanNote {
  std::string encounter_id;
  std::vector<std::string> tokens;
};

/// Sentence delimiters that survive cleaning.
inline constexpr std::string_view kSentenceDelimiters = ".;?!";

/// Lowercases, deletes digits, turns every other non-letter (except the
/// sentence delimiters) into a space, collapses space runs and trims.
/// Idempotent.
std::string normalize_text(std::string_view raw);

/// Splits normalized text on the delimiters and then on spaces. Empty
/// segments are dropped.
std::vector<Sentence> split_sentences(std::string_view clean);

/// normalize_text followed by split_sentences, flattened.
CleanNote clean_note(const RawNote& note);

/// A replayable source of sentences. Each call to for_each walks the whole
/// source from the beginning.
class SentenceStream {
 public:
  virtual ~SentenceStream() = default;
  virtual void for_each(const std::function<void(const Sentence&)>& visit) const = 0;
};

/// Streams every line of every regular file under a directory (or a single
/// file) through the cleaning rules. Files are visited in lexicographic
/// path order, lines in file order. Only one line is held in memory.
class CorpusStream final : public SentenceStream {
 public:
  explicit CorpusStream(std::filesystem::path source);

  void for_each(const std::function<void(const Sentence&)>& visit) const override;

  const std::vector<std::filesystem::path>& files() const { return files_; }

 private:
  std::filesystem::path source_;
  std::vector<std::filesystem::path> files_;
};

/// Sentences already in memory (tests, synthetic corpora).
class VectorStream final : public SentenceStream {
 public:
  explicit VectorStream(std::vector<Sentence> sentences) : sentences_(std::move(sentences)) {}

  void for_each(const std::function<void(const Sentence&)>& visit) const override;

  const std::vector<Sentence>& sentences() const { return sentences_; }

 private:
  std::vector<Sentence> sentences_;
};

/// Lists the regular files of a directory in lexicographic order; a file
/// path yields itself.
std::vector<std::filesystem::path> list_corpus_files(const std::filesystem::path& source);

inline constexpr std::string_view kEncounterIdColumn = "PAT_ENC_CSN_ID";
inline constexpr std::string_view kNoteTextColumn = "NOTE_TEXT";

/// Reads a notes CSV with `PAT_ENC_CSN_ID` and `NOTE_TEXT` columns (other
/// columns are ignored). Rows keep file order.
std::vector<RawNote> load_notes(const std::filesystem::path& path);

void write_notes(const std::filesystem::path& path, const std::vector<RawNote>& notes);

}  // namespace notevec::corpus
