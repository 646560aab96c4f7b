#include "prefcal/parse.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace prefcal {

namespace {

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

/// Selects the first/last well-formed <tag>...</tag> span and returns its
/// trimmed content.
std::optional<std::string_view> select_tag_content(std::string_view text,
                                                   const std::string& tag,
                                                   OutputGrammar::Occurrence occ) {
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  std::optional<std::string_view> found;
  std::size_t pos = 0;
  while (true) {
    std::size_t o = text.find(open, pos);
    if (o == std::string_view::npos) break;
    std::size_t start = o + open.size();
    std::size_t c = text.find(close, start);
    if (c == std::string_view::npos) break;  // unterminated: not well-formed
    found = trim(text.substr(start, c - start));
    if (occ == OutputGrammar::Occurrence::First) return found;
    pos = c + close.size();
  }
  return found;
}

/// Plain decimal syntax only: digits with at most one point, no signs, no
/// exponents, no percent marks. Stricter parsing keeps the parser a pure
/// deterministic function of the text.
bool is_plain_decimal(std::string_view s) {
  if (s.empty()) return false;
  bool seen_digit = false;
  bool seen_point = false;
  for (char ch : s) {
    if (ch >= '0' && ch <= '9') {
      seen_digit = true;
    } else if (ch == '.') {
      if (seen_point) return false;
      seen_point = true;
    } else {
      return false;
    }
  }
  return seen_digit;
}

}  // namespace

void OutputGrammar::validate() const {
  if (prob_tag.empty() || think_tag.empty() || answer_tag.empty()) {
    throw std::invalid_argument("grammar tag names must be nonempty");
  }
  if (prob_tag == think_tag || prob_tag == answer_tag ||
      think_tag == answer_tag) {
    throw std::invalid_argument("grammar tag names must be distinct");
  }
}

ParsedReport parse_report(std::string_view text, const OutputGrammar& grammar) {
  grammar.validate();
  std::optional<std::string_view> content =
      select_tag_content(text, grammar.prob_tag, grammar.occurrence);
  if (!content) return ParsedReport::unparsable();
  if (!is_plain_decimal(*content)) return ParsedReport::unparsable();
  double value = std::strtod(std::string(*content).c_str(), nullptr);
  if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
    return ParsedReport::unparsable();
  }
  return ParsedReport::of(value);
}

VerdictLetter parse_verdict_letter(std::string_view text,
                                   const OutputGrammar& grammar) {
  grammar.validate();
  std::optional<std::string_view> content =
      select_tag_content(text, grammar.answer_tag, grammar.occurrence);
  std::string_view candidate = content ? *content : trim(text);
  if (candidate == "A") return VerdictLetter::A;
  if (candidate == "B") return VerdictLetter::B;
  return VerdictLetter::Unparsable;
}

std::string format_report(double p, int precision,
                          const std::optional<std::string>& rationale,
                          const OutputGrammar& grammar) {
  grammar.validate();
  if (precision < 0 || precision > 6) {
    throw std::invalid_argument("format_report: precision must be in [0, 6]");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("format_report: p must lie in [0, 1]");
  }
  char number[32];
  std::snprintf(number, sizeof(number), "%.*f", precision, p);
  std::string out;
  if (rationale) {
    out += "<" + grammar.think_tag + ">" + *rationale + "</" +
           grammar.think_tag + ">";
  }
  out += "<" + grammar.prob_tag + ">";
  out += number;
  out += "</" + grammar.prob_tag + ">";
  return out;
}

double parsability_rate(std::span<const std::string> texts,
                        const OutputGrammar& grammar) {
  if (texts.empty()) {
    throw std::domain_error("parsability_rate: empty input");
  }
  std::size_t parsable = 0;
  for (const std::string& t : texts) {
    if (parse_report(t, grammar).parsable()) ++parsable;
  }
  return static_cast<double>(parsable) / static_cast<double>(texts.size());
}

}  // namespace prefcal
