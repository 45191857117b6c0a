print(chr(65));
print(ord("A"));
