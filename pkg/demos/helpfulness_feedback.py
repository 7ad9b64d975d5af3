"""
Multifaceted feedback
=====================

Each reply is judged on empathy, communication skill and coherence. A reply
flagged on any facet counts as unhelpful.
"""
from supportrefine.corpus import Turn
from supportrefine.feedback import FACETS, RuleOracleJudge, aggregate, build_prompt, parse_class

context = [Turn("seeker", "i feel anxious about my exam"),
           Turn("supporter", "i am so sorry you feel anxious about your exam"),
           Turn("seeker", "i keep thinking about my exam . any suggestions ?")]
replies = ["it sounds like you feel anxious about your exam",
           "stop complaining , everyone has problems with a exam",
           "maybe you could try talking to someone about your family",
           "maybe you could try talking to someone about your exam",
           "problems with a exam are very common"]

judge = RuleOracleJudge()
for reply in replies:
    verdicts = [judge.classify(f, context, reply) for f in FACETS]
    print(aggregate(verdicts), " ".join(f"{v.facet.value}={v.class_label}" for v in verdicts), "|", reply)

# a remote judge sees this prompt and must answer with one class name
print()
print(build_prompt(FACETS[0], context, replies[0]))
print()
for raw in ("Strong Empathy", "  weak empathy.", "Class: No Empathy"):
    print(repr(raw), "->", parse_class(FACETS[0], raw))
