if (1) { RegExp.input = "a"; print(RegExp.rightContext); }
