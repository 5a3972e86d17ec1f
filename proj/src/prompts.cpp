#include <algorithm>
#include <fstream>
#include <sstream>

#include "topicloop/llm_client.hpp"

namespace topicloop {

namespace {

const char* kTopicInference =
    "Generate {count} set of topics from the given corpus vocabulary. The criteria are: "
    "1) Cluster the terms into {count} topics; 2) Ensure each topic is semantically coherent; "
    "3) Avoid repetition of words across topics and minimize random noise. "
    "Examples: {examples}. Topics: {topics}";

const char* kCoherenceEvaluation =
    "Evaluate whether the following set of words forms a semantically coherent cluster. The criteria are: "
    "1) All words should relate to the same overarching theme or concept; "
    "2) Their meanings and contexts should align closely; 3) There should be no outliers. "
    "If the cluster meets these criteria, respond with \"Yes.\" If not, respond with \"No\". "
    "Examples: {examples}. cluster to Evaluate: {cluster}";

const char* kPostCorrection =
    "Assess whether the following Chinese words meet the specified criteria. The criteria are: "
    "1) All words should belong to the same category or concept; "
    "2) The meanings, contexts, and usage should be very similar; 3) No exceptions should exist. "
    "If the words meet the criteria, respond with \"Yes.\" If the words do not meet the criteria, "
    "respond with \"No\" and list the words that do not fit using Python list syntax. "
    "Examples: {examples}. Words to Evaluate: {words}";

// Kept in sync with data/fewshot/*.txt.
const char* kTopicInferenceExamples =
    "vocabulary: [\"apple\", \"bus\", \"banana\", \"train\", \"cherry\", \"car\"], count: 2 ->\n"
    "Topic 1: [\"apple\", \"banana\", \"cherry\"]\n"
    "Topic 2: [\"bus\", \"train\", \"car\"]";
const char* kCoherenceExamples =
    "cluster: [\"apple\", \"banana\", \"cherry\", \"grape\", \"mango\"] -> Yes.\n"
    "cluster: [\"doctor\", \"nurse\", \"hospital\", \"guitar\", \"clinic\"] -> No";
const char* kPostCorrectionExamples =
    "words: [\"football\", \"basketball\", \"tennis\", \"swimming\", \"athlete\"] -> Yes.\n"
    "words: [\"stock\", \"market\", \"investor\", \"banana\", \"shares\", \"violin\"] -> No [\"banana\", \"violin\"]";

std::string trim_trailing(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  return s;
}

}  // namespace

std::string to_string(PromptName name) {
  switch (name) {
    case PromptName::TopicInference: return "topic_inference";
    case PromptName::CoherenceEvaluation: return "coherence_evaluation";
    case PromptName::PostCorrection: return "post_correction";
  }
  return "unknown";
}

PromptName prompt_name_from_string(const std::string& s) {
  if (s == "topic_inference") return PromptName::TopicInference;
  if (s == "coherence_evaluation") return PromptName::CoherenceEvaluation;
  if (s == "post_correction") return PromptName::PostCorrection;
  throw ValidationError("unknown prompt name '" + s + "'");
}

const PromptTemplate& PromptTemplate::builtin(PromptName name) {
  static const PromptTemplate topic{PromptName::TopicInference, kTopicInference, {"count", "examples", "topics"}};
  static const PromptTemplate coherence{PromptName::CoherenceEvaluation, kCoherenceEvaluation, {"examples", "cluster"}};
  static const PromptTemplate correction{PromptName::PostCorrection, kPostCorrection, {"examples", "words"}};
  switch (name) {
    case PromptName::TopicInference: return topic;
    case PromptName::CoherenceEvaluation: return coherence;
    case PromptName::PostCorrection: return correction;
  }
  throw ValidationError("unknown prompt template");
}

std::string render_prompt(const PromptTemplate& tmpl, const Bindings& bindings) {
  for (const auto& name : tmpl.placeholders) {
    auto it = bindings.find(name);
    if (it == bindings.end() || it->second.empty())
      throw ValidationError("unbound placeholder {" + name + "} in " + to_string(tmpl.name) + " prompt");
  }
  std::string out;
  out.reserve(tmpl.text.size() + 256);
  const std::string& text = tmpl.text;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i + 1);
      if (close != std::string::npos) {
        const std::string name = text.substr(i + 1, close - i - 1);
        if (std::find(tmpl.placeholders.begin(), tmpl.placeholders.end(), name) != tmpl.placeholders.end()) {
          out += bindings.at(name);
          i = close + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

std::string format_word_list(std::span<const std::string> words) {
  std::string out = "[";
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ", ";
    out += nlohmann::json(words[i]).dump();
  }
  out += "]";
  return out;
}

FewShotExamples FewShotExamples::defaults() {
  return {kTopicInferenceExamples, kCoherenceExamples, kPostCorrectionExamples};
}

FewShotExamples FewShotExamples::load_dir(const std::filesystem::path& dir) {
  FewShotExamples ex = defaults();
  auto read = [&](PromptName name, std::string& slot) {
    std::ifstream in(dir / (to_string(name) + ".txt"));
    if (!in) return;
    std::ostringstream ss;
    ss << in.rdbuf();
    slot = trim_trailing(ss.str());
  };
  read(PromptName::TopicInference, ex.topic_inference);
  read(PromptName::CoherenceEvaluation, ex.coherence_evaluation);
  read(PromptName::PostCorrection, ex.post_correction);
  return ex;
}

const std::string& FewShotExamples::for_prompt(PromptName name) const {
  switch (name) {
    case PromptName::TopicInference: return topic_inference;
    case PromptName::CoherenceEvaluation: return coherence_evaluation;
    case PromptName::PostCorrection: return post_correction;
  }
  throw ValidationError("unknown prompt");
}

}  // namespace topicloop
