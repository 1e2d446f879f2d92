#include "corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace rankvocab {

void Corpus::add(Document doc) {
  if (!label_index_.count(doc.label)) {
    label_index_.emplace(doc.label, static_cast<int64_t>(labels.size()));
    labels.push_back(doc.label);
  }
  docs.push_back(std::move(doc));
}

int64_t Corpus::label_index(const std::string& label) const {
  auto it = label_index_.find(label);
  return it == label_index_.end() ? -1 : it->second;
}

int64_t Corpus::num_in_split(Split s) const {
  int64_t n = 0;
  for (const Document& d : docs)
    if (d.split == s) n++;
  return n;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    bool word_char = (c >= 0x80) || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                     (c >= 'A' && c <= 'Z');
    if (word_char) {
      if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
      cur.push_back(static_cast<char>(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string lemma_pass(const std::string& t) {
  std::string s = t;
  if (ends_with(s, "sses")) {
    s.resize(s.size() - 2);
  } else if (ends_with(s, "ies")) {
    s.resize(s.size() - 3);
    s.push_back('y');
  } else if (ends_with(s, "s") && !ends_with(s, "ss") && s.size() > 3) {
    s.pop_back();
  }
  if (s.size() > 5 && ends_with(s, "ing")) s.resize(s.size() - 3);
  if (s.size() > 4 && ends_with(s, "ed")) s.resize(s.size() - 2);
  return s;
}

}  // namespace

std::string lemmatize(const std::string& token) {
  // Iterate to a fixpoint; every rule shortens the token so this terminates.
  std::string cur = token;
  for (;;) {
    std::string next = lemma_pass(cur);
    if (next == cur) return cur;
    cur = std::move(next);
  }
}

namespace {

Split parse_split(const std::string& s, const std::string& where) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ParseError(where + ": unknown split '" + s + "' (expected train or test)");
}

}  // namespace

Corpus ingest_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file: " + path);
  Corpus corpus;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (trim(line).empty()) continue;
    std::string where = path + ":" + std::to_string(lineno);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object()) throw ParseError(where + ": expected a JSON object");
    if (!obj.contains("label") || !obj["label"].is_string())
      throw ParseError(where + ": missing string field 'label'");
    if (!obj.contains("text") || !obj["text"].is_string())
      throw ParseError(where + ": missing string field 'text'");
    Document doc;
    doc.label = obj["label"].get<std::string>();
    doc.tokens = tokenize(obj["text"].get<std::string>());
    if (obj.contains("split")) {
      if (!obj["split"].is_string()) throw ParseError(where + ": field 'split' must be a string");
      doc.split = parse_split(obj["split"].get<std::string>(), where);
    }
    corpus.add(std::move(doc));
  }
  return corpus;
}

Corpus ingest_dirs(const std::string& root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root);
  Corpus corpus;
  std::vector<fs::path> split_dirs;
  for (const auto& e : fs::directory_iterator(root)) split_dirs.push_back(e.path());
  std::sort(split_dirs.begin(), split_dirs.end());
  for (const fs::path& sp : split_dirs) {
    if (!fs::is_directory(sp))
      throw ParseError(sp.string() + ": expected <root>/<split>/<label>/<doc> layout");
    Split split = parse_split(sp.filename().string(), sp.string());
    std::vector<fs::path> label_dirs;
    for (const auto& e : fs::directory_iterator(sp)) label_dirs.push_back(e.path());
    std::sort(label_dirs.begin(), label_dirs.end());
    for (const fs::path& lp : label_dirs) {
      if (!fs::is_directory(lp))
        throw ParseError(lp.string() + ": expected a label directory");
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(lp)) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const fs::path& f : files) {
        if (!fs::is_regular_file(f)) throw ParseError(f.string() + ": expected a document file");
        Document doc;
        doc.label = lp.filename().string();
        doc.split = split;
        doc.tokens = tokenize(read_text_file(f.string()));
        corpus.add(std::move(doc));
      }
    }
  }
  return corpus;
}

Corpus ingest(const std::string& path, const std::string& format) {
  if (format == "jsonl") return ingest_jsonl(path);
  if (format == "dirs") return ingest_dirs(path);
  throw InvalidArgument("unknown corpus format '" + format + "' (expected jsonl or dirs)");
}

std::unordered_set<std::string> load_stopword_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open stopword file: " + path);
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::string w = trim(line);
    if (w.empty() || w[0] == '#') continue;
    words.insert(w);
  }
  return words;
}

const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> kWords = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any",
      "are", "as", "at", "be", "because", "been", "before", "being", "below", "between",
      "both", "but", "by", "can", "cannot", "could", "did", "do", "does", "doing", "down",
      "during", "each", "few", "for", "from", "further", "had", "has", "have", "having",
      "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if",
      "in", "into", "is", "it", "its", "itself", "just", "may", "me", "might", "more",
      "most", "must", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
      "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same",
      "shall", "she", "should", "so", "some", "such", "than", "that", "the", "their",
      "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those",
      "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what",
      "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
      "you", "your", "yours", "yourself", "yourselves"};
  return kWords;
}

PreprocessResult preprocess(const Corpus& corpus, const std::unordered_set<std::string>& stopwords,
                            int64_t min_count) {
  if (min_count < 1) throw InvalidArgument("min_count must be >= 1");
  PreprocessResult res;
  for (const Document& doc : corpus.docs) {
    Document out;
    out.label = doc.label;
    out.split = doc.split;
    out.tokens.reserve(doc.tokens.size());
    for (const std::string& tok : doc.tokens) {
      if (stopwords.count(tok)) continue;
      std::string lemma = lemmatize(tok);
      // A lemma can itself be a stopword (e.g. "wills" -> "will"); filter
      // again so reprocessing a processed corpus is a no-op.
      if (stopwords.count(lemma)) continue;
      out.tokens.push_back(std::move(lemma));
    }
    res.corpus.add(std::move(out));
  }
  for (const Document& doc : res.corpus.docs) {
    if (doc.split != Split::kTrain) continue;
    for (const std::string& tok : doc.tokens) {
      res.stats.counts[tok]++;
      res.stats.total++;
    }
  }
  for (const auto& [word, count] : res.stats.counts) {
    if (count >= min_count) res.candidates.push_back(word);
  }
  std::sort(res.candidates.begin(), res.candidates.end(),
            [&](const std::string& a, const std::string& b) {
              int64_t ca = res.stats.counts.at(a), cb = res.stats.counts.at(b);
              if (ca != cb) return ca > cb;
              return a < b;
            });
  return res;
}

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); i++) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace

void save_processed(const PreprocessResult& pre, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "corpus.jsonl", std::ios::binary);
    if (!out) throw IoError("cannot write " + dir + "/corpus.jsonl");
    for (const Document& doc : pre.corpus.docs) {
      nlohmann::json obj;
      obj["label"] = doc.label;
      obj["split"] = doc.split == Split::kTrain ? "train" : "test";
      obj["text"] = join_tokens(doc.tokens);
      out << obj.dump() << '\n';
    }
  }
  save_token_stats(pre.stats, (fs::path(dir) / "token_stats.tsv").string());
  {
    std::ofstream out(fs::path(dir) / "candidates.tsv", std::ios::binary);
    if (!out) throw IoError("cannot write " + dir + "/candidates.tsv");
    for (const std::string& w : pre.candidates) out << w << '\t' << pre.stats.counts.at(w) << '\n';
  }
}

Corpus load_processed_corpus(const std::string& dir) {
  // Tokens were already normalized; reuse the JSONL reader (tokenize is the
  // identity on space-joined processed tokens).
  return ingest_jsonl((fs::path(dir) / "corpus.jsonl").string());
}

TokenStats load_token_stats(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open stats file: " + path);
  TokenStats stats;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (trim(line).empty()) continue;
    std::vector<std::string> cols = split(line, '\t');
    int64_t count = 0;
    if (cols.size() < 2 || !parse_int(cols[1], &count)) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": expected word<TAB>count");
    }
    stats.counts[cols[0]] = count;
    stats.total += count;
  }
  return stats;
}

void save_token_stats(const TokenStats& stats, const std::string& path) {
  std::vector<std::pair<std::string, int64_t>> rows(stats.counts.begin(), stats.counts.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write stats file: " + path);
  for (const auto& [word, count] : rows) out << word << '\t' << count << '\n';
}

std::vector<std::string> load_word_column(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open word list: " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    words.push_back(tab == std::string::npos ? line : line.substr(0, tab));
  }
  return words;
}

void save_word_list(const std::vector<std::string>& words, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write word list: " + path);
  for (const std::string& w : words) out << w << '\n';
}

Vocab Vocab::from_words(std::vector<std::string> words) {
  Vocab v;
  v.words = std::move(words);
  for (size_t i = 0; i < v.words.size(); i++) {
    auto [it, fresh] = v.index_.emplace(v.words[i], static_cast<int64_t>(i) + 2);
    if (!fresh) throw InvalidArgument("duplicate vocabulary word '" + v.words[i] + "'");
  }
  return v;
}

int64_t Vocab::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? 1 : it->second;
}

std::vector<int64_t> encode(std::span<const std::string> tokens, const Vocab& vocab,
                            int64_t maxlen) {
  if (maxlen < 1) throw InvalidArgument("maxlen must be positive");
  std::vector<int64_t> out(static_cast<size_t>(maxlen), 0);
  int64_t n = std::min<int64_t>(maxlen, static_cast<int64_t>(tokens.size()));
  for (int64_t i = 0; i < n; i++) out[static_cast<size_t>(i)] = vocab.index_of(tokens[static_cast<size_t>(i)]);
  return out;
}

}  // namespace rankvocab
