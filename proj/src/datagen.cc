#include "hail/datagen.h"

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>

#include "hail/error.h"

namespace hail {

namespace {

constexpr std::array<const char*, 8> kAgents = {
    "Mozilla/5.0 (X11; Linux x86_64)", "Mozilla/5.0 (Windows NT 10.0)", "Opera/9.80 (Macintosh)",
    "Safari/537.36 (iPhone)", "curl/7.68.0", "Googlebot/2.1", "Lynx/2.8.9rel.1", "Wget/1.20.3"};
constexpr std::array<const char*, 10> kCountries = {"USA", "DEU", "FRA", "BRA", "IND",
                                                    "CHN", "JPN", "GBR", "CAN", "AUS"};
constexpr std::array<const char*, 8> kLanguages = {"en-US", "de-DE", "fr-FR", "pt-BR",
                                                   "hi-IN", "zh-CN", "ja-JP", "en-GB"};

std::string RandomWord(std::mt19937_64& rng, int min_len, int max_len) {
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<int> letter('a', 'z');
  std::string w(len(rng), 'a');
  for (char& c : w) c = static_cast<char>(letter(rng));
  return w;
}

}  // namespace

Schema UserVisitsSchema() {
  return Schema({{"sourceIP", 1, AttrType::kIpv4},
                 {"destURL", 2, AttrType::kVarchar},
                 {"visitDate", 3, AttrType::kDate},
                 {"adRevenue", 4, AttrType::kFloat64},
                 {"userAgent", 5, AttrType::kVarchar},
                 {"countryCode", 6, AttrType::kVarchar},
                 {"languageCode", 7, AttrType::kVarchar},
                 {"searchWord", 8, AttrType::kVarchar},
                 {"duration", 9, AttrType::kInt32}},
                ',');
}

Schema SyntheticSchema() {
  std::vector<Attribute> attrs;
  for (int i = 1; i <= 19; ++i) attrs.push_back({"a" + std::to_string(i), i, AttrType::kInt32});
  return Schema(std::move(attrs), ',');
}

void GenerateUserVisits(std::ostream& out, uint64_t rows, uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int32_t first_day = *ParseDate("1990-01-01");
  const int32_t last_day = *ParseDate("2012-12-31");
  const int32_t special_day = *ParseDate(kSpecialDate);
  std::uniform_int_distribution<uint32_t> ip(0, UINT32_MAX);
  std::uniform_int_distribution<int32_t> day(first_day, last_day);
  std::uniform_int_distribution<int> cents(0, 49999);
  std::uniform_int_distribution<int> duration(1, 10000);
  std::uniform_int_distribution<size_t> agent(0, kAgents.size() - 1);
  std::uniform_int_distribution<size_t> country(0, kCountries.size() - 1);
  std::uniform_int_distribution<size_t> language(0, kLanguages.size() - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const uint32_t special_ip = *ParseIpv4(kSpecialIp);

  std::string line;
  char buf[32];
  for (uint64_t r = 0; r < rows; ++r) {
    uint32_t source = ip(rng);
    int32_t visit = day(rng);
    const bool forced = r % 9973 == 17;
    if (forced || coin(rng) < 2e-5) source = special_ip;
    if (forced && (r / 9973) % 2 == 0) visit = special_day;
    line.clear();
    line += FormatIpv4(source);
    line += ",http://";
    line += RandomWord(rng, 4, 12);
    line += ".com/";
    line += RandomWord(rng, 3, 20);
    line += ".html,";
    line += FormatDate(visit);
    line += ',';
    const int c = cents(rng);
    std::snprintf(buf, sizeof buf, "%d.%02d", c / 100, c % 100);
    line += buf;
    line += ',';
    line += kAgents[agent(rng)];
    line += ',';
    line += kCountries[country(rng)];
    line += ',';
    line += kLanguages[language(rng)];
    line += ',';
    line += RandomWord(rng, 3, 10);
    line += ',';
    line += std::to_string(duration(rng));
    line += '\n';
    out << line;
  }
}

void GenerateSynthetic(std::ostream& out, uint64_t rows, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int32_t> value(0, kSyntheticMax - 1);
  std::string line;
  char buf[16];
  for (uint64_t r = 0; r < rows; ++r) {
    line.clear();
    for (int a = 0; a < 19; ++a) {
      if (a > 0) line += ',';
      auto res = std::to_chars(buf, buf + sizeof buf, value(rng));
      line.append(buf, res.ptr);
    }
    line += '\n';
    out << line;
  }
}

void GenerateToFile(const std::string& dataset, const std::filesystem::path& path, uint64_t rows, uint64_t seed) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Throw(ErrorCode::kIoError, "cannot write " + path.string());
  if (dataset == "uservisits") {
    GenerateUserVisits(out, rows, seed);
  } else if (dataset == "synthetic") {
    GenerateSynthetic(out, rows, seed);
  } else {
    Throw(ErrorCode::kInvalidArgument, "unknown dataset " + dataset + " (uservisits, synthetic)");
  }
  out.flush();
  if (!out) Throw(ErrorCode::kIoError, "short write to " + path.string());
}

std::vector<NamedQuery> BobQueries() {
  const std::string proj = "projection={@8,@9,@4}";
  return {
      {"Bob-Q1", "filter=\"@3 between(1999-01-01,2000-01-01)\", projection={@1}"},
      {"Bob-Q2", "filter=\"@1 =('172.101.11.46')\", " + proj},
      {"Bob-Q3", "filter=\"@1 =('172.101.11.46') and @3 =(1992-12-22)\", " + proj},
      {"Bob-Q4", "filter=\"@4 >=(1) and @4 <=(10)\", " + proj},
      {"Bob-Q5", "filter=\"@4 >=(1) and @4 <=(100)\", " + proj},
  };
}

std::vector<NamedQuery> SyntheticQueries() {
  auto projection = [](int n) {
    std::string p = "projection={";
    for (int i = 1; i <= n; ++i) p += (i > 1 ? ",@" : "@") + std::to_string(i);
    return p + "}";
  };
  const std::string q1 = "filter=\"@1 between(0,99999999)\", ";
  const std::string q2 = "filter=\"@1 between(0,9999999)\", ";
  return {
      {"Syn-Q1a", q1 + projection(19)}, {"Syn-Q1b", q1 + projection(9)}, {"Syn-Q1c", q1 + projection(1)},
      {"Syn-Q2a", q2 + projection(19)}, {"Syn-Q2b", q2 + projection(9)}, {"Syn-Q2c", q2 + projection(1)},
  };
}

}  // namespace hail
