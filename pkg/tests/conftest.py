from hypothesis import settings

settings.register_profile("rcbm", deadline=None, max_examples=60)
settings.load_profile("rcbm")
