#include "splat/schema.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace splat {

using nlohmann::json;

int ServiceSchema::intent_index(const std::string& name) const {
  for (size_t i = 0; i < intents.size(); ++i)
    if (intents[i].name == name) return static_cast<int>(i);
  return -1;
}

int ServiceSchema::slot_index(const std::string& name) const {
  for (size_t i = 0; i < slots.size(); ++i)
    if (slots[i].name == name) return static_cast<int>(i);
  return -1;
}

void ServiceSchema::validate() const {
  if (service_name.empty()) throw std::runtime_error("schema: empty service name");
  std::set<std::string> seen_names;
  for (const IntentDef& it : intents)
    if (!seen_names.insert(it.name).second)
      throw std::runtime_error("schema '" + service_name + "': duplicate intent name '" + it.name +
                               "'");
  seen_names.clear();
  for (const SlotDef& s : slots) {
    if (!seen_names.insert(s.name).second)
      throw std::runtime_error("schema '" + service_name + "': duplicate slot name '" + s.name +
                               "'");
    if (s.is_categorical && s.possible_values.empty())
      throw std::runtime_error("schema '" + service_name + "': categorical slot '" + s.name +
                               "' has no possible_values");
  }
}

int Dialogue::user_turn_count() const {
  int n = 0;
  for (const DialogueTurn& t : turns)
    if (t.speaker == Speaker::User) ++n;
  return n;
}

void Dialogue::validate() const {
  if (turns.empty())
    throw std::runtime_error("dialogue '" + dialogue_id + "': no turns");
  for (size_t i = 1; i < turns.size(); ++i)
    if (turns[i].speaker == turns[i - 1].speaker)
      throw std::runtime_error("dialogue '" + dialogue_id + "': speakers do not alternate at turn " +
                               std::to_string(i));
  if (user_turn_count() == 0)
    throw std::runtime_error("dialogue '" + dialogue_id + "': no user turns");
}

namespace {

json parse_or_fail(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(origin + ": malformed JSON at byte " + std::to_string(e.byte) + ": " +
                             e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<ServiceSchema> parse_schemas_json(const std::string& text, const std::string& origin) {
  const json j = parse_or_fail(text, origin);
  if (!j.is_array()) throw std::runtime_error(origin + ": expected a JSON array of services");
  std::vector<ServiceSchema> out;
  for (const json& js : j) {
    ServiceSchema s;
    s.service_name = js.at("service_name").get<std::string>();
    s.seen = js.value("seen", true);
    for (const json& ji : js.value("intents", json::array())) {
      IntentDef it;
      it.name = ji.at("name").get<std::string>();
      it.description = ji.at("description").get<std::string>();
      s.intents.push_back(std::move(it));
    }
    for (const json& js : js.value("slots", json::array())) {
      SlotDef sl;
      sl.name = js.at("name").get<std::string>();
      sl.description = js.at("description").get<std::string>();
      sl.is_categorical = js.value("is_categorical", false);
      for (const json& v : js.value("possible_values", json::array()))
        sl.possible_values.push_back(v.get<std::string>());
      s.slots.push_back(std::move(sl));
    }
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Dialogue> parse_dialogues_json(const std::string& text, const std::string& origin) {
  const json j = parse_or_fail(text, origin);
  if (!j.is_array()) throw std::runtime_error(origin + ": expected a JSON array of dialogues");
  std::vector<Dialogue> out;
  for (const json& jd : j) {
    Dialogue d;
    d.dialogue_id = jd.at("dialogue_id").get<std::string>();
    d.service = jd.at("service").get<std::string>();
    for (const json& jt : jd.at("turns")) {
      DialogueTurn t;
      const std::string sp = jt.at("speaker").get<std::string>();
      if (sp == "user")
        t.speaker = Speaker::User;
      else if (sp == "system")
        t.speaker = Speaker::System;
      else
        throw std::runtime_error(origin + ": dialogue '" + d.dialogue_id + "': unknown speaker '" +
                                 sp + "'");
      t.text = jt.at("text").get<std::string>();
      if (t.speaker == Speaker::User) {
        if (!jt.contains("state"))
          throw std::runtime_error(origin + ": dialogue '" + d.dialogue_id +
                                   "': user turn without gold state");
        const json& st = jt.at("state");
        t.state.active_intent = st.value("active_intent", "NONE");
        for (auto it = st.at("slot_values").begin(); it != st.at("slot_values").end(); ++it)
          t.state.slot_values[it.key()] = it.value().get<std::string>();
      }
      d.turns.push_back(std::move(t));
    }
    d.validate();
    out.push_back(std::move(d));
  }
  return out;
}

std::string schemas_to_json(const std::vector<ServiceSchema>& schemas) {
  json arr = json::array();
  for (const ServiceSchema& s : schemas) {
    json js;
    js["service_name"] = s.service_name;
    js["seen"] = s.seen;
    js["intents"] = json::array();
    for (const IntentDef& it : s.intents)
      js["intents"].push_back({{"name", it.name}, {"description", it.description}});
    js["slots"] = json::array();
    for (const SlotDef& sl : s.slots) {
      json js2 = {{"name", sl.name},
                  {"description", sl.description},
                  {"is_categorical", sl.is_categorical}};
      js2["possible_values"] = sl.possible_values;
      js["slots"].push_back(std::move(js2));
    }
    arr.push_back(std::move(js));
  }
  return arr.dump(2) + "\n";
}

std::string dialogues_to_json(const std::vector<Dialogue>& dialogues) {
  json arr = json::array();
  for (const Dialogue& d : dialogues) {
    json jd;
    jd["dialogue_id"] = d.dialogue_id;
    jd["service"] = d.service;
    jd["turns"] = json::array();
    for (const DialogueTurn& t : d.turns) {
      json jt;
      jt["speaker"] = t.speaker == Speaker::User ? "user" : "system";
      jt["text"] = t.text;
      if (t.speaker == Speaker::User) {
        jt["state"] = {{"active_intent", t.state.active_intent},
                       {"slot_values", t.state.slot_values}};
      }
      jd["turns"].push_back(std::move(jt));
    }
    arr.push_back(std::move(jd));
  }
  return arr.dump(2) + "\n";
}

std::vector<ServiceSchema> load_schemas(const std::string& path) {
  return parse_schemas_json(read_file(path), path);
}

std::vector<Dialogue> load_dialogues(const std::string& path) {
  return parse_dialogues_json(read_file(path), path);
}

}  // namespace splat
