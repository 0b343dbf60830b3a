"""Writes the case-study replay fixture: a 180-node citation-style graph that
contains every node referenced by the recorded run, and a mock script that
replays the recorded agent replies (mode decision, five generated nodes,
scores rejecting the fifth, goal not reached).

Run from this directory: python3 make_case_study.py
"""

import json
import random

TEXT_536 = 'Title: Dynamic Constraint Satisfaction using Case-Based Reasoning Techniques  \n Abstract: The Dynamic Constraint Satisfaction Problem (DCSP) formalism has been gaining attention as a valuable and often necessary extension of the static CSP framework. Dynamic Constraint Satisfaction enables CSP techniques to be applied more extensively, since it can be applied in domains where the set of constraints and variables involved in the problem evolves with time. At the same time, the Case-Based Reasoning (CBR) community has been working on techniques by which to reuse existing solutions when solving new problems. We have observed that dynamic constraint satisfaction matches very closely the case-based reasoning process of case adaptation. These observations emerged from our previous work on combining CBR and CSP to achieve a constraint-based adaptation. This paper summarizes our previous results, describes the similarity of the challenges facing both DCSP and case adaptation, and shows how CSP and CBR can together begin to address these chal lenges.'
TEXT_41 = "Title: A Memory Model for Case Retrieval by Activation Passing  \n Abstract: We present a tree-structured architecture for supervised learning. The statistical model underlying the architecture is a hierarchical mixture model in which both the mixture coefficients and the mixture components are generalized linear models (GLIM's). Learning is treated as a maximum likelihood problem; in particular, we present an Expectation-Maximization (EM) algorithm for adjusting the parameters of the architecture. We also develop an on-line learning algorithm in which the parameters are updated incrementally. Comparative simulation results are presented in the robot dynamics domain. This report describes research done at the Dept. of Brain and Cognitive Sciences, the Center for Biological and Computational Learning, and the Artificial Intelligence Laboratory of the Massachusetts Institute of Technology. Support for CBCL is provided in part by a grant from the NSF (ASC-9217041). Support for the laboratory's artificial intelligence research is provided in part by the Advanced Research Projects Agency of the Dept. of Defense. The authors were supported by a grant from the McDonnell-Pew Foundation, by a grant from ATR Human Information Processing Research Laboratories, by a grant from Siemens Corporation, by by grant IRI-9013991 from the National Science Foundation, by grant N00014-90-J-1942 from the Office of Naval Research, and by NSF grant ECS-9216531 to support an Initiative in Intelligent Control at MIT. Michael I. Jordan is a NSF Presidential Young Investigator. "
NEW_NODE_TEXTS = ['Title: Integrating Explanation-Based Learning with Case Adaptation Strategies\n Abstract: This paper presents a novel approach to case adaptation in case-based reasoning systems by integrating explanation-based learning techniques. Traditional case adaptation relies heavily on domain-specific adaptation rules that are often difficult to acquire and maintain. Our approach uses explanations generated during problem-solving to identify adaptation patterns and generalize them into reusable adaptation strategies. We demonstrate how these strategies can be applied across different domains with minimal knowledge engineering effort. Experimental results show that the integrated approach improves adaptation performance in comparison to rule-based adaptation methods, especially in domains where adaptation knowledge is incomplete or rapidly evolving. The paper presents a formal framework for the approach and discusses its implementation in a case-based planning system.', 'Title: Adaptive Parameter Control in Evolution Strategies for Dynamic Environments\n Abstract: Omitted due to table size limitation.', 'Title: Multi-Level Similarity Assessment for Case Retrieval in Heterogeneous Domains\n Abstract: Omitted due to table size limitation.', 'Title: Hybrid Neural-Symbolic Architecture for Interpretable Knowledge Extraction\n Abstract: Omitted due to table size limitation.', 'Title: Case-base Design for Knowledge Discovery\n Abstract: Case Based Reasoning has proven to be useful for AI systems. Our research introduces a new method called KDD-CBR (Knowledge Discovery through Database Case-Based Reasoning) which combines data mining with case bases for information retrieval and management. The system works by analyzing patterns in large datasets and then applies unique non-traditional methods for case storage. Unlike other approaches, we focus on pattern recognition instead of adaptation or similarity, which makes our approach completely novel in the field. Tests show this approach has better inference capability than other CBR techniques in some instances but worse in others. The implications for future research directions are significant and should be explored further with additional funding and more test cases. Additionally, we plan to integrate KDD-CBR with deep neural networks to further enhance performance on arbitrary datasets.']

TOPICS = [
    ["case-based reasoning", "case retrieval", "case adaptation", "analogical problem solving", "memory organization"],
    ["genetic algorithms", "evolution strategies", "genetic programming", "fitness landscapes", "population diversity"],
    ["neural networks", "backpropagation", "recurrent networks", "hidden unit representations", "connectionist learning"],
    ["probabilistic methods", "Bayesian networks", "belief propagation", "hidden Markov models", "graphical models"],
    ["reinforcement learning", "temporal difference learning", "Q-learning", "policy iteration", "exploration strategies"],
    ["rule learning", "inductive logic programming", "decision lists", "rule induction", "relational learning"],
    ["learning theory", "PAC learning", "VC dimension", "mistake bounds", "sample complexity"],
]
TEMPLATES = [
    "Title: {a} for {b}\n Abstract: We study {a} in the context of {b}. The approach is evaluated on standard benchmarks and compared with {c}.",
    "Title: On {a} and {c}\n Abstract: This paper analyzes how {a} interacts with {c} and reports experiments on {b}.",
    "Title: Improving {b} with {a}\n Abstract: We present a method that applies {a} to {b}, and discuss links to {c}.",
]

# Labels of the nodes referenced by the recorded run.
REFERENCED = {
    41: 0, 536: 0, 639: 0, 337: 0, 833: 0, 476: 0, 637: 0, 638: 0, 825: 0, 1004: 0, 1017: 0,
    166: 0, 761: 0, 1005: 0, 1116: 0, 1196: 0, 462: 1, 70: 1, 1312: 1, 1290: 3, 263: 3,
}
FIXED_EDGES = [(536, 639)] + [(41, v) for v in (166, 637, 761, 1004, 1005, 1116, 1196)]
LABEL_WEIGHTS = [147, 208, 410, 214, 110, 90, 175]


def build(seed=7, n=180):
    rng = random.Random(seed)
    ids = sorted(REFERENCED)
    pool = [i for i in range(1354) if i not in REFERENCED]
    ids += rng.sample(pool, n - len(ids))
    ids.sort()
    labels = {}
    for i in ids:
        labels[i] = REFERENCED.get(i, rng.choices(range(7), weights=LABEL_WEIGHTS)[0])
    edges = set(tuple(sorted(e)) for e in FIXED_EDGES)
    # Homophilous random edges, about 3.7 average degree.
    while len(edges) < int(1.85 * n):
        a, b = rng.sample(ids, 2)
        if labels[a] != labels[b] and rng.random() < 0.8:
            continue
        edges.add((min(a, b), max(a, b)))
    nbrs = {i: [] for i in ids}
    for a, b in sorted(edges):
        nbrs[a].append(b)
        nbrs[b].append(a)
    nodes = []
    for i in ids:
        if i == 536:
            text = TEXT_536
        elif i == 41:
            text = TEXT_41
        else:
            a, b, c = rng.sample(TOPICS[labels[i]], 3)
            text = rng.choice(TEMPLATES).format(a=a.capitalize(), b=b, c=c)
        mask = "Train" if rng.random() < 0.6 or i in (41, 536) else rng.choice(["Validation", "Test"])
        nodes.append({"node_id": i, "label": labels[i], "text": text, "neighbors": sorted(nbrs[i]), "mask": mask})
    return {"class_count": 7, "nodes": nodes}


def script():
    generated = []
    neighbors = [[337, 833, 639, 476], [462, 70, 1312], [637, 638, 825, 1004], [1290, 263], [462, 70, 1017]]
    labels = [0, 1, 0, 3, 0]
    for k in range(5):
        generated.append({"node_id": "new_node %d" % (k + 1), "label": labels[k], "text": NEW_NODE_TEXTS[k],
                          "neighbors": neighbors[k], "mask": "Train"})
    scores = {"scores": [
        {"node_id": "new_node 1", "semantic_coherence": 9, "structural_integrity": 8,
         "reason": "coherent case adaptation paper linked to adaptation work"},
        {"node_id": "new_node 2", "semantic_coherence": 8, "structural_integrity": 8,
         "reason": "fits the evolutionary computation cluster"},
        {"node_id": "new_node 3", "semantic_coherence": 8, "structural_integrity": 9,
         "reason": "bridges case retrieval nodes"},
        {"node_id": "new_node 4", "semantic_coherence": 8, "structural_integrity": 7,
         "reason": "plausible hybrid architecture paper"},
        {"node_id": "new_node 5", "semantic_coherence": 5, "structural_integrity": 4,
         "reason": "overclaims novelty and links to unrelated evolutionary work; delete new_node 5"},
    ], "summary": "keep new_node 1 to 4, delete new_node 5"}
    return {
        "Manager": "Manager's Decision: {Semantic Enhancement}",
        "Enhancement": "```json\n" + json.dumps(generated, indent=1) + "\n```",
        "Evaluation": json.dumps(scores),
        "Goal": "Compared with the initial report the class balance and community coherence are still "
                "changing, so the entire synthesis process has not converged.",
    }


if __name__ == "__main__":
    with open("case_study_graph.json", "w") as f:
        json.dump(build(), f, indent=1)
        f.write("\n")
    with open("case_study_script.json", "w") as f:
        json.dump(script(), f, indent=1)
        f.write("\n")
