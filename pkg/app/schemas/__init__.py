# Pydantic schemas