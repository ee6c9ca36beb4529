from .numtest import TestCase
