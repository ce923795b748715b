#include <gtest/gtest.h>

#include "attnie/errors.h"
#include "attnie/event_graph.h"
#include "attnie/schema.h"
#include "attnie/standoff.h"
#include "test_util.h"

namespace attnie {
namespace {

Document nested_doc() {
  const std::string text = "p65 expression induced by IL-6";
  return parse_standoff(text, "T1\tProtein 0 3\tp65\nT2\tProtein 26 30\tIL-6\n",
                        "T3\tGene_expression 4 14\texpression\n"
                        "T4\tPositive_regulation 15 22\tinduced\n"
                        "E1\tPositive_regulation:T4 Theme:E2 Cause:T2\n"
                        "E2\tGene_expression:T3 Theme:T1\n"
                        "M1\tSpeculation E1\n");
}

TEST(EventGraph, EdgesUseBaseRoles) {
  const Document d = parse_standoff("p65 binds IkB", "T1\tProtein 0 3\tp65\nT2\tProtein 10 13\tIkB\n",
                                    "T3\tBinding 4 9\tbinds\nE1\tBinding:T3 Theme:T1 Theme2:T2\n");
  EXPECT_EQ(d.graph.edges(), (std::vector<Edge>{{"T3", "T1", "Theme"}, {"T3", "T2", "Theme"}}));
}

TEST(EventGraph, NestedTargetsResolveToTriggers) {
  const Document d = nested_doc();
  EXPECT_EQ(d.graph.argument_node("E2"), "T3");
  EXPECT_EQ(d.graph.argument_node("T1"), "T1");
  EXPECT_EQ(d.graph.argument_node("E9"), "");
  const auto edges = d.graph.edges();
  EXPECT_NE(std::find(edges.begin(), edges.end(), Edge{"T4", "T3", "Theme"}), edges.end());
  const auto order = d.graph.event_order();
  EXPECT_EQ(d.graph.events[order[0]].id, "E2");
  EXPECT_TRUE(d.graph.find_event("E1")->speculated());
}

TEST(EventGraph, ValidateCatchesProblems) {
  Document d = nested_doc();
  EXPECT_NO_THROW(d.graph.validate(d.text));
  Document dangling = d;
  dangling.graph.events[0].args[0].target = "E7";
  EXPECT_THROW(dangling.graph.validate(d.text), ReferenceError);
  Document cyclic = d;
  cyclic.graph.events[1].args = {{"Theme", "E1"}};
  EXPECT_THROW(cyclic.graph.validate(d.text), IntegrityError);
  EXPECT_THROW(cyclic.graph.event_order(), IntegrityError);
  Document loop = d;
  loop.graph.events[1].args = {{"Theme", "E2"}};
  EXPECT_THROW(loop.graph.validate(d.text), IntegrityError);
  Document span = d;
  span.graph.nodes[0].spans[0].end = 99;
  EXPECT_THROW(span.graph.validate(d.text), IntegrityError);
}

TEST(EventGraph, IsomorphismIgnoresIds) {
  const Document d = nested_doc();
  Document renamed = d;
  for (Node& n : renamed.graph.nodes) {
    if (n.id == "T4") n.id = "T40";
  }
  for (Event& e : renamed.graph.events) {
    if (e.trigger == "T4") e.trigger = "T40";
  }
  EXPECT_TRUE(isomorphic(d.graph, renamed.graph));
  Document changed = d;
  changed.graph.events[0].args.pop_back();
  EXPECT_FALSE(isomorphic(d.graph, changed.graph));
  Document unflagged = d;
  unflagged.graph.events[0].speculation_id.clear();
  EXPECT_FALSE(isomorphic(d.graph, unflagged.graph));
}

TEST(EventGraph, UndirectedRelationsCompareUnordered) {
  const TaskSchema schema = load_schema(testing::fixtures() / "relations" / "schema.json");
  const std::string text = "COX2 with PTGS1";
  const std::string a1 = "T1\tGene 0 4\tCOX2\nT2\tGene 10 15\tPTGS1\n";
  const Document a = parse_standoff(text, a1, "R1\tInteracts Arg1:T1 Arg2:T2\n", "x", &schema);
  const Document b = parse_standoff(text, a1, "R1\tInteracts Arg1:T2 Arg2:T1\n", "x", &schema);
  EXPECT_TRUE(isomorphic(a.graph, b.graph, &schema));
  EXPECT_FALSE(isomorphic(a.graph, b.graph));
}

TEST(Ids, OrderingAndNumbers) {
  EXPECT_TRUE(id_less("T2", "T10"));
  EXPECT_TRUE(id_less("E9", "T1"));
  EXPECT_FALSE(id_less("T10", "T2"));
  EXPECT_EQ(id_number("T12"), 12u);
  EXPECT_EQ(id_number("X"), 0u);
  EXPECT_EQ(base_role("Theme2"), "Theme");
  EXPECT_EQ(base_role("Cause"), "Cause");
}

TEST(Schema, JsonRoundTripAndLabels) {
  const TaskSchema s = load_schema(testing::fixtures() / "events" / "schema.json");
  const TaskSchema back = parse_schema(schema_to_json(s));
  EXPECT_EQ(schema_to_json(back), schema_to_json(s));
  EXPECT_EQ(s.edge_labels(), (std::vector<std::string>{"Cause", "Theme"}));
  EXPECT_EQ(s.modifier_labels(), (std::vector<std::string>{"Negation", "Speculation"}));
  EXPECT_EQ(s.node_labels().size(), 6u);
  EXPECT_TRUE(s.is_event_type("Binding"));
  EXPECT_EQ(s.kind_of("Protein"), NodeKind::kEntity);
}

TEST(Schema, RejectsBadDefinitions) {
  EXPECT_THROW(parse_schema("{"), Error);
  EXPECT_THROW(parse_schema(R"({"name":"x","entities":["P"],"events":{"B":{"roles":{"Theme":
      {"targets":["Nope"],"min":1,"max":1}}}}})"),
               ConfigError);
  EXPECT_THROW(parse_schema(R"({"name":"x","entities":["P"],"events":{"B":{"roles":{"Theme":
      {"targets":["P"],"min":0,"max":0}}}}})"),
               ConfigError);
}

}  // namespace
}  // namespace attnie
