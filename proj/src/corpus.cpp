#include "notevec/corpus.h"

#include <algorithm>
#include <fstream>

#include "notevec/csv.h"
#include "notevec/error.h"

namespace notevec::corpus {

namespace fs = std::filesystem;

namespace {

bool is_delimiter(char ch) { return kSentenceDelimiters.find(ch) != std::string_view::npos; }

void split_tokens(std::string_view segment, Sentence& out) {
  std::size_t pos = 0;
  while (pos < segment.size()) {
    while (pos < segment.size() && segment[pos] == ' ') ++pos;
    const std::size_t start = pos;
    while (pos < segment.size() && segment[pos] != ' ') ++pos;
    if (pos > start) out.emplace_back(segment.substr(start, pos - start));
  }
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char ch : raw) {
    if (ch >= '0' && ch <= '9') continue;
    char kept = '\0';
    if (ch >= 'a' && ch <= 'z') {
      kept = ch;
    } else if (ch >= 'A' && ch <= 'Z') {
      kept = static_cast<char>(ch - 'A' + 'a');
    } else if (is_delimiter(ch)) {
      kept = ch;
    }
    if (kept == '\0') {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(kept);
  }
  return out;
}

std::vector<Sentence> split_sentences(std::string_view clean) {
  std::vector<Sentence> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= clean.size(); ++i) {
    if (i < clean.size() && !is_delimiter(clean[i])) continue;
    Sentence sentence;
    split_tokens(clean.substr(start, i - start), sentence);
    if (!sentence.empty()) sentences.push_back(std::move(sentence));
    start = i + 1;
  }
  return sentences;
}

CleanNote clean_note(const RawNote& note) {
  CleanNote clean{note.encounter_id, {}};
  for (auto& sentence : split_sentences(normalize_text(note.note_text))) {
    for (auto& token : sentence) clean.tokens.push_back(std::move(token));
  }
  return clean;
}

std::vector<fs::path> list_corpus_files(const fs::path& source) {
  std::error_code ec;
  const auto status = fs::status(source, ec);
  if (ec || !fs::exists(status)) {
    throw Error(ErrorCategory::io, "corpus path does not exist: " + source.string());
  }
  if (fs::is_regular_file(status)) return {source};
  if (!fs::is_directory(status)) {
    throw Error(ErrorCategory::io, "corpus path is neither a file nor a directory: " + source.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(source, ec)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  if (ec) throw Error(ErrorCategory::io, "cannot list " + source.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());
  return files;
}

CorpusStream::CorpusStream(fs::path source)
    : source_(std::move(source)), files_(list_corpus_files(source_)) {}

void CorpusStream::for_each(const std::function<void(const Sentence&)>& visit) const {
  std::string line;
  for (const auto& file : files_) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCategory::io, "cannot read corpus file " + file.string());
    while (std::getline(in, line)) {
      for (const auto& sentence : split_sentences(normalize_text(line))) visit(sentence);
    }
    if (in.bad()) throw Error(ErrorCategory::io, "read failure in " + file.string());
  }
}

void VectorStream::for_each(const std::function<void(const Sentence&)>& visit) const {
  for (const auto& sentence : sentences_) visit(sentence);
}

std::vector<RawNote> load_notes(const fs::path& path) {
  const auto table = csv::read_file(path);
  const auto id_col = table.require_column(kEncounterIdColumn, path);
  const auto text_col = table.require_column(kNoteTextColumn, path);
  std::vector<RawNote> notes;
  notes.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw Error(ErrorCategory::format, path.string() + ": data row " + std::to_string(r + 1) +
                                             " has " + std::to_string(row.size()) +
                                             " fields, header has " +
                                             std::to_string(table.header.size()));
    }
    if (row[id_col].empty()) {
      throw Error(ErrorCategory::format,
                  path.string() + ": data row " + std::to_string(r + 1) + " has an empty encounter id");
    }
    notes.push_back({row[id_col], row[text_col]});
  }
  return notes;
}

void write_notes(const fs::path& path, const std::vector<RawNote>& notes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path.string());
  csv::write_record(out, {std::string(kEncounterIdColumn), std::string(kNoteTextColumn)});
  for (const auto& note : notes) csv::write_record(out, {note.encounter_id, note.note_text});
}

}  // namespace notevec::corpus
