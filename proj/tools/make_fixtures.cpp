// Regenerates the scripted fixture sets under a target directory.
//
// Each set gets kg.tsv, questions.jsonl, llm.jsonl and karpa.conf. The LLM
// replies are produced by a rule-based author that knows every question's
// relation paths and answers, and are recorded by prompt digest so the
// scripted provider can replay them.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "karpa/embedding.hpp"
#include "karpa/kg_store.hpp"
#include "karpa/llm.hpp"
#include "karpa/pipeline.hpp"
#include "karpa/planner.hpp"
#include "karpa/text.hpp"

namespace fs = std::filesystem;

namespace {

using Triple = std::array<const char*, 3>;
using Paths = std::map<std::size_t, std::vector<std::string>>;

struct ScriptedQuestion {
  std::string id;
  std::string question;
  std::vector<std::string> topics;
  std::vector<std::vector<std::string>> answers;
  Paths initial;
  Paths replanned;
  std::vector<std::string> extra_answers;  // ungrounded additions
};

const std::vector<Triple> kBrahuiTriples = {
    {"Brahui Language", "language.human_language.main_country", "Pakistan"},
    {"Brahui Language", "language.human_language.language_family", "Dravidian languages"},
    {"Brahui Language", "language.human_language.writing_system", "Perso-Arabic script"},
    {"Pakistan", "government.government_position_held.office_holder", "Muhammad Zia-ul-Haq"},
    {"Pakistan", "location.country.capital", "Islamabad"},
    {"Pakistan", "location.country.currency_used", "Pakistani rupee"},
    {"Muhammad Zia-ul-Haq", "people.person.place_of_birth", "Jalandhar"},
    {"Afghanistan", "location.country.languages_spoken", "Brahui Language"},
    {"Afghanistan", "location.country.capital", "Kabul"},
};

const std::vector<Triple> kToyTriples = {
    {"Brahui Language", "language.human_language.main_country", "Pakistan"},
    {"Brahui Language", "language.human_language.language_family", "Dravidian languages"},
    {"Pakistan", "government.government_position_held.office_holder", "Muhammad Zia-ul-Haq"},
    {"Pakistan", "location.country.capital", "Islamabad"},
    {"Pakistan", "location.country.currency_used", "Pakistani rupee"},
    {"Muhammad Zia-ul-Haq", "people.person.place_of_birth", "Jalandhar"},
    {"Rift Valley Province", "location.administrative_division.country", "Kenya"},
    {"Rift Valley Province", "location.location.geolocation", "UnName Entity"},
    {"Kenya", "location.country.currency_used", "Kenyan shilling"},
    {"Kenya", "location.country.capital", "Nairobi"},
    {"Kenya", "location.country.official_language", "Swahili language"},
    {"Tom", "people.person.spouse_s", "Mary"},
    {"Tom", "people.person.children", "Lily"},
    {"Lily", "people.person.parents", "Mary"},
    {"Tom", "people.person.profession", "Engineer"},
    {"Tom", "people.person.parents", "Robert"},
    {"Mary", "people.person.place_of_birth", "Boston"},
    {"Inception", "film.film.directed_by", "Christopher Nolan"},
    {"Inception", "film.film.initial_release_date", "2010"},
    {"Inception", "film.film.starring", "Leonardo DiCaprio"},
    {"Christopher Nolan", "people.person.nationality", "United Kingdom"},
    {"Leonardo DiCaprio", "people.person.place_of_birth", "Los Angeles"},
    {"Marie Curie", "people.person.spouse_s", "Pierre Curie"},
    {"Marie Curie", "award.award_winner.awards_won", "Nobel Prize in Physics"},
    {"Marie Curie", "award.award_winner.awards_won", "Nobel Prize in Chemistry"},
    {"Marie Curie", "people.person.place_of_birth", "Warsaw"},
    {"Warsaw", "location.location.containedby", "Poland"},
    {"Pierre Curie", "people.person.place_of_birth", "Paris"},
    {"Paris", "location.location.containedby", "France"},
    {"Bohemian Rhapsody", "music.recording.artist", "Queen"},
    {"Bohemian Rhapsody", "music.composition.composer", "Freddie Mercury"},
    {"Queen", "music.musical_group.member", "Freddie Mercury"},
    {"Queen", "music.musical_group.member", "Brian May"},
    {"Queen", "music.musical_group.member", "Roger Taylor"},
    {"Queen", "music.musical_group.member", "John Deacon"},
    {"Freddie Mercury", "people.person.place_of_birth", "Zanzibar"},
};

const std::vector<Triple> kExtraTriples = {
    {"Harry Potter and the Philosopher's Stone", "book.written_work.author", "J. K. Rowling"},
    {"Harry Potter and the Philosopher's Stone", "book.book.genre", "Fantasy"},
    {"J. K. Rowling", "people.person.place_of_birth", "Yate"},
    {"J. K. Rowling", "people.person.nationality", "United Kingdom"},
    {"Yate", "location.location.containedby", "England"},
    {"Lionel Messi", "sports.pro_athlete.teams", "FC Barcelona"},
    {"Lionel Messi", "sports.pro_athlete.teams", "Paris Saint-Germain"},
    {"Lionel Messi", "sports.pro_athlete.teams", "Inter Miami"},
    {"FC Barcelona", "sports.sports_team.location", "Barcelona"},
    {"Paris Saint-Germain", "sports.sports_team.location", "Paris"},
    {"Inter Miami", "sports.sports_team.location", "Miami"},
    {"Lionel Messi", "people.person.nationality", "Argentina"},
    {"Argentina", "location.country.capital", "Buenos Aires"},
    {"Argentina", "location.country.currency_used", "Argentine peso"},
    {"Lionel Messi", "people.person.place_of_birth", "Rosario"},
    {"Rosario", "location.location.containedby", "Argentina"},
    {"Apple Inc.", "organization.organization.founders", "Steve Jobs"},
    {"Apple Inc.", "organization.organization.founders", "Steve Wozniak"},
    {"Apple Inc.", "organization.organization.headquarters", "Cupertino"},
    {"Cupertino", "location.location.containedby", "California"},
    {"Steve Jobs", "people.person.place_of_birth", "San Francisco"},
    {"San Francisco", "location.location.containedby", "California"},
};

const ScriptedQuestion kBrahuiPresident{
    "brahui-president",
    "Name the president of the country whose main spoken language was Brahui in 1980?",
    {"Brahui Language"},
    {{"Muhammad Zia-ul-Haq", "Zia-ul-Haq"}},
    {{2, {"language.human_language.main_country", "government.government_position_held.office_holder"}}},
    {{2, {"language.human_language.main_country", "government.government_position_held.office_holder"}}},
    {}};

std::vector<ScriptedQuestion> toy5_questions() {
  return {
      kBrahuiPresident,
      {"kenya-currency",
       "Rift Valley Province is located in a nation that uses which form of currency?",
       {"Rift Valley Province"},
       {{"Kenyan shilling"}},
       {{2, {"location.administrative_division.country", "location.country.currency"}}},
       {{2, {"location.administrative_division.country", "location.country.currency_used"}}},
       {}},
      {"tom-wife",
       "Who is Tom's wife?",
       {"Tom"},
       {{"Mary"}},
       {{1, {"people.person.spouse"}}, {2, {"people.person.children", "people.person.parent"}}},
       {{1, {"people.person.spouse_s"}}, {2, {"people.person.children", "people.person.parents"}}},
       {}},
      {"inception-director",
       "Who directed Inception?",
       {"Inception"},
       {{"Christopher Nolan", "Nolan"}},
       {{1, {"film.film.director"}}},
       {{1, {"film.film.directed_by"}}},
       {}},
      {"bohemian-members",
       "Who are the members of the band that recorded Bohemian Rhapsody?",
       {"Bohemian Rhapsody"},
       {{"Freddie Mercury"}, {"Brian May"}, {"Roger Taylor"}, {"John Deacon"}},
       {{2, {"music.recording.artist", "music.group.member"}}},
       {{2, {"music.recording.artist", "music.musical_group.member"}}},
       {}},
  };
}

std::vector<ScriptedQuestion> toy20_questions() {
  auto qs = toy5_questions();
  const std::vector<ScriptedQuestion> more = {
      {"brahui-currency",
       "What currency is used in the country where Brahui is mainly spoken?",
       {"Brahui Language"},
       {{"Pakistani rupee"}},
       {{2, {"language.human_language.main_country", "location.country.currency_used"}}},
       {{2, {"language.human_language.main_country", "location.country.currency_used"}}},
       {}},
      {"kenya-capital",
       "What is the capital of the country that contains Rift Valley Province?",
       {"Rift Valley Province"},
       {{"Nairobi"}},
       {{2, {"location.administrative_division.country", "location.country.capital"}}},
       {{2, {"location.administrative_division.country", "location.country.capital"}}},
       {}},
      {"tom-father",
       "Who is Tom's father?",
       {"Tom"},
       {{"Robert"}},
       {{1, {"people.person.father"}}},
       {{1, {"people.person.parents"}}},
       {}},
      {"tom-profession",
       "What does Tom do for a living?",
       {"Tom"},
       {{"Engineer"}},
       {{1, {"people.person.occupation"}}},
       {{1, {"people.person.profession"}}},
       {}},
      {"inception-director-nationality",
       "What is the nationality of the director of Inception?",
       {"Inception"},
       {{"United Kingdom", "UK", "Britain"}},
       {{2, {"film.film.director", "people.person.nationality"}}},
       {{2, {"film.film.directed_by", "people.person.nationality"}}},
       {}},
      {"inception-star-birthplace",
       "Where was the lead actor of Inception born?",
       {"Inception"},
       {{"Los Angeles"}},
       {{2, {"film.film.starring", "people.person.place_of_birth"}}},
       {{2, {"film.film.starring", "people.person.place_of_birth"}}},
       {}},
      {"curie-awards",
       "Which awards did Marie Curie win?",
       {"Marie Curie"},
       {{"Nobel Prize in Physics"}, {"Nobel Prize in Chemistry"}},
       {{1, {"award.award_winner.awards"}}},
       {{1, {"award.award_winner.awards_won"}}},
       {}},
      {"curie-country",
       "In which country was Marie Curie born?",
       {"Marie Curie"},
       {{"Poland"}},
       {{2, {"people.person.place_of_birth", "location.location.containedby"}}},
       {{2, {"people.person.place_of_birth", "location.location.containedby"}}},
       {}},
      {"hp-author",
       "Who wrote Harry Potter and the Philosopher's Stone?",
       {"Harry Potter and the Philosopher's Stone"},
       {{"J. K. Rowling", "J.K. Rowling", "Joanne Rowling"}},
       {{1, {"book.written_work.author"}}},
       {{1, {"book.written_work.author"}}},
       {}},
      {"hp-author-birthplace",
       "Where was the author of Harry Potter and the Philosopher's Stone born?",
       {"Harry Potter and the Philosopher's Stone"},
       {{"Yate"}},
       {{2, {"book.written_work.author", "people.person.birthplace"}}},
       {{2, {"book.written_work.author", "people.person.place_of_birth"}}},
       {}},
      {"bohemian-composer-birthplace",
       "Where was the composer of Bohemian Rhapsody born?",
       {"Bohemian Rhapsody"},
       {{"Zanzibar"}},
       {{2, {"music.composition.composer", "people.person.place_of_birth"}}},
       {{2, {"music.composition.composer", "people.person.place_of_birth"}}},
       {}},
      {"messi-teams",
       "Which clubs has Lionel Messi played for?",
       {"Lionel Messi"},
       {{"FC Barcelona"}, {"Paris Saint-Germain", "PSG"}, {"Inter Miami", "Inter Miami CF"}},
       {{1, {"sports.pro_athlete.teams"}}, {2, {"sports.pro_athlete.teams", "sports.sports_team.location"}}},
       {{1, {"sports.pro_athlete.teams"}}},
       {}},
      {"messi-capital",
       "What is the capital of the country Lionel Messi is a citizen of?",
       {"Lionel Messi"},
       {{"Buenos Aires"}},
       {{2, {"people.person.nationality", "location.country.capital"}}},
       {{2, {"people.person.nationality", "location.country.capital"}}},
       {}},
      {"apple-founders",
       "Who founded Apple Inc.?",
       {"Apple Inc."},
       {{"Steve Jobs"}, {"Steve Wozniak"}},
       {{1, {"organization.organization.founders"}}},
       {{1, {"organization.organization.founders"}}},
       {"Ronald Wayne"}},
      {"apple-state",
       "In which state is Apple Inc. headquartered?",
       {"Apple Inc."},
       {{"California"}},
       {{2, {"organization.organization.headquarters", "location.location.containedby"}}},
       {{2, {"organization.organization.headquarters", "location.location.containedby"}}},
       {}},
  };
  qs.insert(qs.end(), more.begin(), more.end());
  return qs;
}

std::string line_after(const std::string& text, std::size_t pos) {
  const auto end = text.find('\n', pos);
  return std::string(karpa::text::trim(std::string_view(text).substr(pos, end - pos)));
}

std::string render_paths(const Paths& paths) {
  karpa::CandidatePathSet set;
  for (const auto& [len, rels] : paths) set.by_length[len].push_back({rels});
  return karpa::render_path_sets(set);
}

// Answers prompts the way a careful model following the exemplars would.
class FixtureAuthor final : public karpa::LlmProvider {
 public:
  explicit FixtureAuthor(std::vector<ScriptedQuestion> questions) : questions_(std::move(questions)) {}

  std::string identity() const override { return "fixture-author"; }

  karpa::CompletionResult complete(const std::vector<karpa::ChatMessage>& messages,
                                   const karpa::CompletionParams&) override {
    const std::string& prompt = messages.back().content;
    const auto q_pos = prompt.rfind("\nQ:\n");
    if (q_pos == std::string::npos) throw std::runtime_error("author: no question in prompt");
    const ScriptedQuestion& sq = find(line_after(prompt, q_pos + 4));

    karpa::CompletionResult r;
    if (prompt.rfind("In the process", 0) == 0) {
      r.text = render_paths(sq.initial);
    } else if (prompt.rfind("Given a set of relations", 0) == 0) {
      r.text = render_paths(sq.replanned);
    } else {
      r.text = reason(sq, prompt.substr(q_pos));
    }
    r.prompt_tokens = karpa::estimate_tokens(prompt);
    r.completion_tokens = karpa::estimate_tokens(r.text);
    return r;
  }

 private:
  const ScriptedQuestion& find(const std::string& question) const {
    for (const auto& q : questions_) {
      if (q.question == question) return q;
    }
    throw std::runtime_error("author: unknown question " + question);
  }

  static bool is_gold(const ScriptedQuestion& sq, const std::string& tail) {
    for (const auto& aliases : sq.answers) {
      if (aliases.front() == tail) return true;
    }
    return false;
  }

  static std::string reason(const ScriptedQuestion& sq, const std::string& section) {
    std::ostringstream out;
    out << "Let's analyze the reasoning paths step-by-step to determine the correct answer to the question.\n";
    std::vector<std::string> found;
    std::istringstream lines(section);
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
      const auto t = karpa::text::trim(line);
      if (t.empty() || t.front() != '(' || t.back() != ')') continue;
      const auto comma = t.rfind(", ");
      const std::string tail(t.substr(comma + 2, t.size() - comma - 3));
      out << ++n << '.' << t << ": ";
      if (is_gold(sq, tail)) {
        out << tail << " answers the question.\n";
        if (std::find(found.begin(), found.end(), tail) == found.end()) found.push_back(tail);
      } else {
        out << tail << " is not the answer to the question.\n";
      }
    }
    if (found.empty()) {
      out << "None of the tail entities answers the question, so the answer is {}.";
      return out.str();
    }
    found.insert(found.end(), sq.extra_answers.begin(), sq.extra_answers.end());
    out << "Therefore, the correct tail entity is:\n{" << karpa::text::join(found, ", ") << "}.";
    return out.str();
  }

  std::vector<ScriptedQuestion> questions_;
};

class Recorder final : public karpa::LlmProvider {
 public:
  explicit Recorder(std::shared_ptr<karpa::LlmProvider> inner) : inner_(std::move(inner)) {}
  std::string identity() const override { return inner_->identity(); }
  karpa::CompletionResult complete(const std::vector<karpa::ChatMessage>& messages,
                                   const karpa::CompletionParams& params) override {
    auto r = inner_->complete(messages, params);
    std::lock_guard lock(mu_);
    recorded_[karpa::message_digest(messages)] = r.text;
    return r;
  }
  const std::map<std::string, std::string>& recorded() const { return recorded_; }

 private:
  std::shared_ptr<karpa::LlmProvider> inner_;
  std::mutex mu_;
  std::map<std::string, std::string> recorded_;
};

void write_set(const fs::path& dir, const std::vector<Triple>& triples,
               const std::vector<ScriptedQuestion>& questions) {
  fs::create_directories(dir);
  {
    std::ofstream kg(dir / "kg.tsv", std::ios::trunc);
    kg << "# head\trelation\ttail\n";
    for (const auto& t : triples) kg << t[0] << '\t' << t[1] << '\t' << t[2] << '\n';
  }
  {
    std::ofstream qs(dir / "questions.jsonl", std::ios::trunc);
    for (const auto& q : questions) {
      qs << nlohmann::json{{"id", q.id}, {"question", q.question}, {"topics", q.topics}, {"answers", q.answers}}
                .dump()
         << '\n';
    }
  }
  {
    std::ofstream conf(dir / "karpa.conf", std::ios::trunc);
    conf << "# Offline fixture: mock embeddings, scripted completions.\n"
         << "kg.path = kg.tsv\n"
         << "embedding.kind = mock\n"
         << "embedding.dim = 64\n"
         << "llm.kind = scripted\n"
         << "llm.fixtures = llm.jsonl\n";
  }

  karpa::KnowledgeGraph::Builder builder;
  for (const auto& t : triples) builder.add(t[0], t[1], t[2]);
  const auto graph = std::move(builder).build();
  karpa::EmbeddingGateway embeddings(std::make_shared<karpa::MockEmbeddingProvider>(64));
  auto recorder = std::make_shared<Recorder>(std::make_shared<FixtureAuthor>(questions));
  karpa::LlmGateway llm(recorder, {});
  karpa::Pipeline pipeline(graph, embeddings, llm, {});
  for (const auto& q : questions) {
    auto trace = pipeline.run({q.id, q.question, q.topics});
    if (trace.error) throw std::runtime_error(q.id + ": " + *trace.error);
  }

  std::ofstream out(dir / "llm.jsonl", std::ios::trunc);
  for (const auto& [digest, text] : recorder->recorded()) {
    out << nlohmann::json{{"digest", digest}, {"response_text", text}}.dump() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("data/fixtures");
  try {
    write_set(root / "brahui", kBrahuiTriples, {kBrahuiPresident});
    write_set(root / "toy5", kToyTriples, toy5_questions());
    auto toy20 = kToyTriples;
    toy20.insert(toy20.end(), kExtraTriples.begin(), kExtraTriples.end());
    write_set(root / "toy20", toy20, toy20_questions());
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << '\n';
    return 1;
  }
  std::cout << "fixtures written to " << root.string() << '\n';
  return 0;
}
