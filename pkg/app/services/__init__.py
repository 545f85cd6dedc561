# Graph, embedding, inference and explanation services