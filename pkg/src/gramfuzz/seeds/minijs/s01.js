match("abcdef");
tail();
