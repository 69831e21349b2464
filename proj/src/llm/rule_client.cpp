#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "elm/common/resources.hpp"
#include "elm/common/text.hpp"
#include "elm/llm/client.hpp"

namespace elm::llm {

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "about",  "after",   "against", "among",   "and",     "another", "because", "been",    "before",
        "being",  "between", "both",    "compared", "could",  "during",  "each",    "either",  "first",
        "from",   "group",   "groups",  "have",    "however", "into",    "more",    "most",    "other",
        "patients", "results", "second", "should", "significant", "significantly", "study", "such", "than",
        "that",   "their",   "there",   "these",   "they",    "this",    "those",   "through", "time",
        "total",  "trial",   "under",   "using",   "were",    "what",    "when",    "where",   "which",
        "while",  "with",    "within",  "without", "would",   "years"};
    return words;
}

std::string first_line(std::string_view s) { return std::string(s.substr(0, s.find('\n'))); }

std::string last_user(const ChatRequest& r) {
    for (auto it = r.messages.rbegin(); it != r.messages.rend(); ++it)
        if (it->role == "user") return it->content;
    return {};
}

std::string system_text(const ChatRequest& r) {
    for (const auto& m : r.messages)
        if (m.role == "system") return m.content;
    return {};
}

// Text between the first quote after `marker` and the quote that ends it
// (the last quote before `stop`, or the last quote overall).
std::string quoted_after(const std::string& s, const std::string& marker, const std::string& stop = {}) {
    const auto m = s.find(marker);
    if (m == std::string::npos) return {};
    const auto open = s.find('"', m + marker.size());
    if (open == std::string::npos) return {};
    std::size_t limit = stop.empty() ? std::string::npos : s.find(stop, open + 1);
    const auto close = s.rfind('"', limit == std::string::npos ? std::string::npos : limit);
    if (close == std::string::npos || close <= open) return s.substr(open + 1);
    return s.substr(open + 1, close - open - 1);
}

std::vector<std::string> lower_words(std::string_view s) {
    std::vector<std::string> out;
    for (auto w : text::word_spans(s)) out.push_back(text::lowercase(w));
    return out;
}

std::vector<std::string> sentences(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < s.size(); ++i) {
        cur += s[i];
        if ((s[i] == '.' || s[i] == '?' || s[i] == '!') && (i + 1 == s.size() || s[i + 1] == ' ')) {
            const auto t = text::trim(cur);
            if (!t.empty()) out.push_back(t);
            cur.clear();
        }
    }
    const auto t = text::trim(cur);
    if (!t.empty()) out.push_back(t);
    return out;
}

std::map<std::string, int> content_counts(const std::string& s) {
    std::map<std::string, int> out;
    for (auto& w : lower_words(s))
        if (w.size() >= 5 && !std::isdigit(static_cast<unsigned char>(w[0])) && !stopwords().count(w)) ++out[w];
    return out;
}

double bigram_diversity(const std::string& s) {
    const auto w = lower_words(s);
    if (w.size() < 2) return w.empty() ? 0.0 : 1.0;
    std::set<std::pair<std::string, std::string>> uniq;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) uniq.emplace(w[i], w[i + 1]);
    return static_cast<double>(uniq.size()) / static_cast<double>(w.size() - 1);
}

double sentence_form(const std::string& s) {
    const auto ss = sentences(s);
    if (ss.empty()) return 0.0;
    int good = 0;
    for (const auto& x : ss) {
        const bool cap = std::isupper(static_cast<unsigned char>(x.front())) || std::isdigit(static_cast<unsigned char>(x.front()));
        const bool end = x.back() == '.' || x.back() == '?' || x.back() == '!';
        const bool len = x.size() >= 20;
        good += cap && end && len;
    }
    return static_cast<double>(good) / static_cast<double>(ss.size());
}

double bag_cosine(const std::string& a, const std::string& b) {
    const auto ca = content_counts(a);
    const auto cb = content_counts(b);
    double dot = 0, na = 0, nb = 0;
    for (auto& [w, c] : ca) {
        na += c * c;
        if (auto it = cb.find(w); it != cb.end()) dot += c * it->second;
    }
    for (auto& [w, c] : cb) nb += c * c;
    if (na == 0 || nb == 0) return 0.0;
    return dot / std::sqrt(na * nb);
}

// ---- demographic extraction ------------------------------------------------

std::string extract_sex(const std::string& abstract) {
    static const std::set<std::string> female = {"woman", "women", "female", "females", "girl", "girls",
                                                 "mother", "mothers"};
    static const std::set<std::string> male = {"man", "men", "male", "males", "boy", "boys", "father", "fathers"};
    bool f = false, m = false;
    for (auto& w : lower_words(abstract)) {
        f = f || female.count(w);
        m = m || male.count(w);
    }
    if (f && !m) return "female";
    if (m && !f) return "male";
    return "neutral";
}

double extract_age(const std::string& abstract) {
    const std::string lower = text::lowercase(abstract);
    std::smatch sm;
    static const std::regex mean_re(R"((?:mean|average)\s+age\s*(?:\(?\s*(?:sd|±)[^)]*\)?\s*)?(?:of|was|:|=|,)?\s*(?:the\s+\w+\s+)?(?:was\s+)?(\d+(?:\.\d+)?))");
    if (std::regex_search(lower, sm, mean_re)) return std::stod(sm[1]);
    static const std::regex pm_re(R"((\d+(?:\.\d+)?)\s*(?:±|\+/-)\s*\d+(?:\.\d+)?\s*years)");
    if (std::regex_search(lower, sm, pm_re)) return std::stod(sm[1]);
    static const std::regex range_re(R"((?:aged|between|from)?\s*(\d+(?:\.\d+)?)\s*(?:to|-|–|and)\s*(\d+(?:\.\d+)?)\s*(?:years|yrs|y\b))");
    if (std::regex_search(lower, sm, range_re)) return (std::stod(sm[1]) + std::stod(sm[2])) / 2.0;
    struct Label {
        const char* pattern;
        double value;
    };
    static const std::vector<Label> labels = {
        {R"(\bcentenarians?\b)", 100.0},
        {R"(\bnonagenarians?\b)", 94.5},
        {R"(\boctogenarians?\b)", 84.5},
        {R"(\b(?:aged 80 and over|80 years and older|oldest old)\b)", 85.0},
        {R"(\b(?:older adults?|elderly|aged|seniors?|geriatric|older (?:people|persons|patients|women|men))\b)", 75.0},
        {R"(\bmiddle[- ]aged\b)", 54.5},
        {R"(\b(?:adolescents?|teenagers?|youths?)\b)", 15.5},
        {R"(\b(?:preschool|toddlers?)\b)", 3.5},
        {R"(\b(?:children|child|pediatric|paediatric|school-age)\b)", 9.0},
        {R"(\b(?:adults?)\b)", 31.5},
    };
    for (const auto& l : labels)
        if (std::regex_search(lower, std::regex(l.pattern))) return l.value;
    return 31.5;
}

// ---- counterfactual rewriting ----------------------------------------------

std::string swap_words(const std::string& s, const std::map<std::string, std::string>& map) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!std::isalpha(static_cast<unsigned char>(s[i]))) {
            out += s[i++];
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
        std::string word = s.substr(i, j - i);
        auto it = map.find(text::lowercase(word));
        if (it != map.end()) {
            std::string rep = it->second;
            if (std::isupper(static_cast<unsigned char>(word[0]))) rep[0] = static_cast<char>(std::toupper(rep[0]));
            out += rep;
        } else {
            out += word;
        }
        i = j;
    }
    return out;
}

std::string rewrite(const std::string& target, const std::string& abstract, bool include_ages) {
    const std::string t = text::lowercase(target);
    if (!include_ages) {
        const bool to_female = t.find("female") != std::string::npos || t.find("women") != std::string::npos;
        static const std::map<std::string, std::string> m2f = {
            {"men", "women"}, {"man", "woman"}, {"male", "female"}, {"males", "females"}, {"boys", "girls"},
            {"boy", "girl"}, {"he", "she"}, {"his", "her"}, {"him", "her"}, {"fathers", "mothers"},
            {"father", "mother"}, {"husbands", "wives"}};
        static const std::map<std::string, std::string> f2m = {
            {"women", "men"}, {"woman", "man"}, {"female", "male"}, {"females", "males"}, {"girls", "boys"},
            {"girl", "boy"}, {"she", "he"}, {"her", "his"}, {"hers", "his"}, {"mothers", "fathers"},
            {"mother", "father"}, {"wives", "husbands"}};
        return swap_words(abstract, to_female ? m2f : f2m);
    }
    const bool to_older = t.find("older") != std::string::npos || t.find("elderly") != std::string::npos ||
                          t.find("aged") != std::string::npos;
    static const std::map<std::string, std::string> c2o = {
        {"children", "older adults"}, {"child", "older adult"}, {"pediatric", "geriatric"},
        {"paediatric", "geriatric"}, {"kids", "seniors"}, {"infants", "older adults"}, {"adolescents", "older adults"},
        {"boys", "older men"}, {"girls", "older women"}};
    static const std::map<std::string, std::string> o2c = {
        {"elderly", "young"}, {"older", "young"}, {"geriatric", "pediatric"}, {"seniors", "children"},
        {"adults", "children"}, {"adult", "child"}, {"aged", "young"}};
    std::string out = swap_words(abstract, to_older ? c2o : o2c);
    static const std::regex age_re(R"((\d+)(\s*(?:-|to)\s*)(\d+)(\s*(?:years|-year)))");
    std::string replaced;
    std::smatch sm;
    std::string rest = out;
    bool any = false;
    while (std::regex_search(rest, sm, age_re)) {
        any = true;
        const int lo = to_older ? 68 : 6;
        const int hi = to_older ? 82 : 12;
        replaced += sm.prefix().str() + std::to_string(lo) + sm[2].str() + std::to_string(hi) + sm[4].str();
        rest = sm.suffix().str();
    }
    out = replaced + rest;
    if (!any) out += to_older ? " Participants were aged 68 to 82 years." : " Participants were aged 6 to 12 years.";
    return out;
}

// ---- task answers ----------------------------------------------------------

std::string plain_summary(const std::string& abstract) {
    const auto ss = sentences(abstract);
    if (ss.empty()) return "This study is described only briefly.";
    std::string out = "This study looked at the following question. " + ss.front();
    if (ss.size() > 1) out += " In short: " + ss.back();
    return out;
}

std::vector<std::pair<std::string, int>> ranked(const std::map<std::string, int>& counts) {
    std::vector<std::pair<std::string, int>> v(counts.begin(), counts.end());
    std::stable_sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.second > b.second; });
    return v;
}

std::string commonalities(const std::string& a, const std::string& b) {
    const auto ca = content_counts(a);
    const auto cb = content_counts(b);
    std::map<std::string, int> shared;
    for (auto& [w, c] : ca)
        if (auto it = cb.find(w); it != cb.end()) shared[w] = c + it->second;
    std::ostringstream out;
    int k = 1;
    for (auto& [w, c] : ranked(shared)) {
        if (k > 5) break;
        out << k++ << ". Both abstracts involve " << w << ".\n";
    }
    static const char* fallback[] = {"Both abstracts report a clinical study.", "Both abstracts describe an intervention.",
                                     "Both abstracts report measured outcomes.", "Both abstracts state a conclusion.",
                                     "Both abstracts describe a study population."};
    for (int f = 0; k <= 5; ++f) out << k++ << ". " << fallback[f] << "\n";
    return text::trim(out.str());
}

std::string differences(const std::string& a, const std::string& b) {
    const auto ca = content_counts(a);
    const auto cb = content_counts(b);
    std::map<std::string, int> only_a, only_b;
    for (auto& [w, c] : ca)
        if (!cb.count(w)) only_a[w] = c;
    for (auto& [w, c] : cb)
        if (!ca.count(w)) only_b[w] = c;
    const auto ra = ranked(only_a);
    const auto rb = ranked(only_b);
    std::ostringstream out;
    for (std::size_t k = 0; k < 5; ++k) {
        const std::string wa = k < ra.size() ? ra[k].first : "other aspects";
        const std::string wb = k < rb.size() ? rb[k].first : "other aspects";
        out << k + 1 << ". The first abstract addresses " << wa << ", while the second addresses " << wb << ".\n";
    }
    return text::trim(out.str());
}

std::string discriminate(const std::string& a, const std::string& b) {
    auto score = [](const std::string& s) { return bigram_diversity(s) + 0.5 * sentence_form(s); };
    return score(b) > score(a) ? "2" : "1";
}

std::string judge(const std::string& prompt) {
    const std::string input = quoted_after(prompt, "Input:", "Actual output:");
    const std::string output = quoted_after(prompt, "Actual output:");
    double s;
    std::string reason;
    if (prompt.find("grammar, spelling") != std::string::npos) {
        s = 0.5 * sentence_form(output) + 0.5 * bigram_diversity(output);
        reason = "Scored from sentence form and repetition.";
    } else {
        s = bag_cosine(input, output);
        reason = "Scored from overlap of content words with the input.";
    }
    const int score = static_cast<int>(std::lround(10.0 * std::clamp(s, 0.0, 1.0)));
    return nlohmann::json{{"score", score}, {"reason", reason}}.dump();
}

std::string answer(const ChatRequest& r) {
    const std::string sys = system_text(r);
    const std::string user = last_user(r);
    static const std::string sex_head = first_line(resources::get("extraction/sex.txt"));
    static const std::string age_head = first_line(resources::get("extraction/age.txt"));
    static const std::string user_prefix = "Now process the following abstract: ";
    auto abstract_of = [&](const std::string& u) {
        return u.rfind(user_prefix, 0) == 0 ? u.substr(user_prefix.size()) : u;
    };
    if (!sys.empty() && sys.rfind(sex_head, 0) == 0)
        return nlohmann::json{{"gender", extract_sex(abstract_of(user))}}.dump();
    if (!sys.empty() && sys.rfind(age_head, 0) == 0) {
        const double age = extract_age(abstract_of(user));
        return nlohmann::json{{"age", age}}.dump();
    }
    if (user.rfind("Which of the following abstracts", 0) == 0)
        return discriminate(quoted_after(user, "1. ", "\n2. "), quoted_after(user, "\n2. "));
    if (user.rfind("You are a medical writing assistant", 0) == 0)
        return plain_summary(quoted_after(user, "plain language summary:"));
    if (user.find("identify their commonalities") != std::string::npos)
        return commonalities(quoted_after(user, "1. ", "\n2. "), quoted_after(user, "\n2. "));
    if (user.find("identify their differences") != std::string::npos)
        return differences(quoted_after(user, "1. ", "\n2. "), quoted_after(user, "\n2. "));
    if (user.rfind("Modify this abstract so the subjects are ", 0) == 0) {
        const auto start = std::string("Modify this abstract so the subjects are ").size();
        const auto end = user.find(" rather than ", start);
        const std::string target = user.substr(start, end == std::string::npos ? 0 : end - start);
        const bool ages = user.find("Include specific ages.") != std::string::npos;
        const std::string abstract = quoted_after(user, "formatting.");
        return rewrite(target, abstract, ages);
    }
    if (user.find("Actual output:") != std::string::npos) return judge(user);
    throw LlmError("rule-based client does not recognise this prompt", false);
}

}  // namespace

std::unique_ptr<LlmClient> make_rule_client(const std::string& model_id) {
    return std::make_unique<FunctionClient>(model_id, answer);
}

}  // namespace elm::llm
