"""
Scoring review text and ranking apps within a sector
====================================================

Sentiment comes from a polarity lexicon with valence shifters.
Toxicity comes from a remote classifier; here a local mock server speaks
the same request format so nothing leaves the machine.  Service relative
rating (SRR) rescales each app's store rating against its sector.
"""

from toxsem.sentiment import default_lexicon, micro_lexicon, score_review, split_sentences
from toxsem.srr import PlayerRating, srr_by_sector
from toxsem.toxicity import MockToxicityServer, RateLimitPolicy, ToxicityClient, stream_scores

# %%
# With the four-word micro lexicon the arithmetic is easy to follow: one
# polarised word, weighted 0.75, in a four-word sentence gives 0.75 / 2.
micro = micro_lexicon()
for text in ("i love this app", "i do not love this app", "the box is rectangular"):
    print(f"{text!r:30} -> {score_review(text, micro).average: .4f}")

# %%
# The bundled lexicon is larger and knows amplifiers and adversatives.
lex = default_lexicon()
review = "Delivery was very fast. The app is good but the support is terrible!"
print(split_sentences(review))
print(score_review(review, lex))

# %%
# Toxicity requests are rate limited, retried on transient failures and
# checkpointed one line per review, so a long run can resume.
comments = [("r1", "Great app, works fine"), ("r2", "you idiots cheated me, total scam"),
            ("r3", ""), ("r4", "बहुत खराब सेवा")]
policy = RateLimitPolicy(max_requests_per_second=20)
with MockToxicityServer() as server, ToxicityClient("mock-key", policy, server.url) as client:
    for (rid, text), score in zip(comments, stream_scores(comments, client)):
        print(rid, score.value if score.present else f"missing ({score.reason})")

# %%
# SRR values within a sector always add up to 10.
players = [PlayerRating("Zomato", 4.1, 5_600_000, 1), PlayerRating("Swiggy", 4.3, 4_800_000, 1),
           PlayerRating("Udemy", 4.5, 900_000, 1), PlayerRating("redbus", 4.6, 1_200_000, 3),
           PlayerRating("goibibo", 4.2, 700_000, 3)]
srr = srr_by_sector(players)
for p in players:
    print(f"{p.appId:>8} sector {p.sector}: {srr[p.appId]:.4f}")
