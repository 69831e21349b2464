#include "elm/eval/redaction.hpp"

#include <regex>

namespace elm::eval {

const std::vector<RegistryPattern>& registry_patterns() {
    static const std::vector<RegistryPattern> p = {
        {"Australian New Zealand Clinical Trials Registry", "ACTRN[0-9]+"},
        {"Chinese Clinical Trials Register", "ChiCTR[A-Z0-9-]+"},
        {"European Union Clinical Trials Information System", "CTIS[0-9-]+"},
        {"Clinical Trials Registry - India", "CTRI[0-9/]+"},
        {"German Clinical Trials Register", "DRKS[0-9]+"},
        {"European Clinical Trials Register", "EUCTR[0-9a-zA-Z-]+"},
        {"Iranian Registry of Clinical Trials", "IRCT[0-9]+N[0-9]+"},
        {"UK Clinical Study Register", "ISRCTN[0-9]+"},
        {"International Traditional Medicine Clinical Trial Registry", "ITMCTR[0-9]+"},
        {"Japan Primary Registries Network", "JPRN-[a-zA-Z0-9]+"},
        {"Korean Clinical Research Information Service", "KCT[0-9]{7}"},
        {"Lebanese Clinical Trials Registry", "LBCTR[0-9]+"},
        {"US National Clinical Trial", "NCT[0-9]{8}"},
        {"Overview of Medical Research in the Netherlands", "NL-OMON[0-9]+"},
        {"Pan African Clinical Trials Registry", "PACTR[0-9]+"},
        {"Brazilian Clinical Trials Registry", "RBR-[a-z0-9]+"},
        {"Cuban Registry of Clinical Trials", "RPCEC[0-9]{4,}"},
        {"Sri Lanka Clinical Trials Registry", R"(SLCTR/\d+/\d+)"},
        {"Thai Clinical Trials Registry", "TCTR[0-9]+"},
    };
    return p;
}

namespace {

const std::vector<std::regex>& compiled() {
    static const std::vector<std::regex> re = [] {
        std::vector<std::regex> out;
        for (const auto& p : registry_patterns()) out.emplace_back(p.regex, std::regex::ECMAScript | std::regex::optimize);
        return out;
    }();
    return re;
}

}  // namespace

RedactionResult redact_registry_ids(std::string_view text) {
    RedactionResult r;
    r.text.reserve(text.size());
    const auto& res = compiled();
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t best = 0;
        // every identifier starts with an uppercase letter
        const bool candidate = text[pos] >= 'A' && text[pos] <= 'Z';
        for (const auto& re : res) {
            std::cmatch m;
            if (candidate && std::regex_search(text.data() + pos, text.data() + text.size(), m, re,
                                  std::regex_constants::match_continuous) &&
                static_cast<std::size_t>(m.length(0)) > best)
                best = static_cast<std::size_t>(m.length(0));
        }
        if (best > 0) {
            r.text += kRedactedToken;
            ++r.count;
            pos += best;
        } else {
            r.text += text[pos++];
        }
    }
    return r;
}

}  // namespace elm::eval
